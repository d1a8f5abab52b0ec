"""Sequential decision process simulation and stationarity diagnostics.

One step of the process picks a unit uniformly at random and redraws its
binary choice from the logit conditional given everyone else's current
choice. Long-run time averages of the resulting single-site Markov chain
estimate equilibrium welfare; for small networks the full transition
kernel can be assembled to verify stationarity of the enumerated Gibbs
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exact import config_matrix, enumerate_gibbs
from .model import Instance, allocation_vector, weights


@dataclass
class ChainState:
    """Mutable state of one simulation chain: choices, step count, and the
    seeded generator that drives it."""

    y: np.ndarray
    t: int
    rng: np.random.Generator

    @classmethod
    def start(cls, n: int, seed: int | None = None) -> "ChainState":
        rng = np.random.default_rng(seed)
        return cls(y=rng.integers(0, 2, size=n).astype(np.int8), t=0, rng=rng)


class ChainModel:
    """Precomputed per-unit update data for fast single-site sweeps."""

    def __init__(self, instance: Instance, d):
        w = weights(instance, d)
        self.n = instance.n
        self.w1 = w.w1
        adj = instance.net.adjacency
        self.neighbors = [np.flatnonzero(adj[i]) for i in range(self.n)]
        self.neighbor_w = [2.0 * w.w2[i, nb] for i, nb in zip(range(self.n), self.neighbors)]


def _sigmoid(a: float) -> float:
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def step(state: ChainState, model: ChainModel) -> ChainState:
    """Advance the chain one step: redraw one uniformly chosen unit.

    At most one coordinate of y changes. The state is updated in place and
    returned.
    """
    i = int(state.rng.integers(model.n))
    arg = model.w1[i] + float(model.neighbor_w[i] @ state.y[model.neighbors[i]])
    state.y[i] = state.rng.random() < _sigmoid(arg)
    state.t += 1
    return state


def mcmc_welfare(
    d,
    instance: Instance,
    sweeps: int = 10_000,
    burn_in: int = 5_000,
    seed: int | None = None,
    steps_per_sweep: int | None = None,
    batches: int = 50,
) -> tuple[float, float]:
    """Per-person welfare estimated by time-averaging the simulated chain.

    A sweep is ``steps_per_sweep`` single-site updates (defaults to one per
    unit; pass 1 to read the iteration counts literally as single steps).
    The per-sweep population mean is recorded after the burn-in period and
    averaged; the standard error comes from batch means.
    """
    if sweeps <= burn_in:
        raise ValueError("sweeps must exceed burn_in")
    model = ChainModel(instance, d)
    n = model.n
    per_sweep = n if steps_per_sweep is None else int(steps_per_sweep)
    state = ChainState.start(n, seed)
    rng = state.rng
    y = state.y
    w1 = model.w1
    neighbors = model.neighbors
    neighbor_w = model.neighbor_w
    kept = np.empty(sweeps - burn_in)
    for sweep_idx in range(sweeps):
        sites = rng.integers(0, n, size=per_sweep)
        draws = rng.random(per_sweep)
        for k in range(per_sweep):
            i = sites[k]
            arg = w1[i] + float(neighbor_w[i] @ y[neighbors[i]])
            y[i] = draws[k] < _sigmoid(arg)
        if sweep_idx >= burn_in:
            kept[sweep_idx - burn_in] = y.mean()
    state.t = sweeps * per_sweep
    estimate = float(kept.mean())
    n_batches = min(batches, kept.size)
    usable = kept[: kept.size - kept.size % n_batches]
    batch_means = usable.reshape(n_batches, -1).mean(axis=1)
    stderr = float(batch_means.std(ddof=1) / np.sqrt(n_batches)) if n_batches > 1 else 0.0
    return estimate, stderr


def single_site_kernel(instance: Instance, d=None, max_units: int = 12) -> np.ndarray:
    """Full 2^N x 2^N transition matrix of the single-site chain.

    Row order matches the configuration codes of the exact enumeration:
    configuration c has y_i = (c >> i) & 1.
    """
    n = instance.n
    if n > max_units:
        raise ValueError(f"kernel assembly infeasible for {n} units (cap {max_units})")
    if d is None:
        d = np.zeros(n, dtype=np.int8)
    w = weights(instance, allocation_vector(d, n))
    y = config_matrix(n)
    total = 1 << n
    # Choice probabilities p[c, i] do not depend on y_i because w2 has a
    # zero diagonal.
    p1 = expit(w.w1 + 2.0 * (y @ w.w2))
    codes = np.arange(total)
    kernel = np.zeros((total, total))
    for i in range(n):
        up = codes | (1 << i)
        down = codes & ~(1 << i)
        np.add.at(kernel, (codes, up), p1[:, i] / n)
        np.add.at(kernel, (codes, down), (1.0 - p1[:, i]) / n)
    return kernel


def stationarity_check(instance: Instance, d=None, max_units: int = 12) -> float:
    """L1 distance between the Gibbs distribution and its one-step image
    under the single-site kernel. Zero (to rounding) certifies stationarity."""
    n = instance.n
    if d is None:
        d = np.zeros(n, dtype=np.int8)
    kernel = single_site_kernel(instance, d, max_units=max_units)
    dist = enumerate_gibbs(weights(instance, d), max_units=max_units, with_probs=True)
    pi = dist.probs
    return float(np.abs(pi @ kernel - pi).sum())
