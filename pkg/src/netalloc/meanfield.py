"""Naive mean-field approximation of the stationary outcome distribution.

Approximates the Gibbs measure by the best independent Bernoulli law,
found by fixed-point iteration on the first-order conditions

    mu_i = logistic(w1_i + 2 (w2 mu)_i).

The iteration sweeps units in index order updating in place by default
(each coordinate update exactly maximizes the variational objective along
that coordinate, so the objective never decreases). A simultaneous-update
mode is available for literal replication of the published iteration; a
contraction certificate guarantees both modes reach the unique maximizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .model import Instance, ThetaParams, WeightSystem, weights

GAUSS_SEIDEL = "gauss-seidel"
JACOBI = "jacobi"


@dataclass(frozen=True)
class SolverSettings:
    """Fixed-point solver controls.

    rho is the objective-increment stopping threshold; foc_tol bounds the
    residual of the first-order conditions at termination. restarts only
    applies when the contraction certificate fails for the instance.
    """

    rho: float = 1e-9
    foc_tol: float = 1e-8
    max_iter: int = 100_000
    mode: str = GAUSS_SEIDEL
    restarts: int = 10
    clamp: float = 1e-15

    def __post_init__(self):
        if self.mode not in (GAUSS_SEIDEL, JACOBI):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class MeanFieldSolution:
    """Converged (or best-effort) mean-field fixed point with diagnostics."""

    mu: np.ndarray
    objective: float
    iterations: int
    converged: bool
    foc_residual: float
    contraction_certified: bool = False

    @property
    def welfare(self) -> float:
        return float(self.mu.sum())


def _clamped(mu: np.ndarray, clamp: float) -> np.ndarray:
    return np.clip(mu, clamp, 1.0 - clamp)


def variational_objective(mu, w: WeightSystem, clamp: float = 1e-15) -> float:
    """Energy-plus-entropy objective whose maximizer minimizes the KL
    divergence from the Gibbs measure.

    Boundary values are clamped so the entropy term takes its limiting
    value 0 instead of producing log(0).
    """
    mu = _clamped(np.asarray(mu, dtype=float), clamp)
    energy = float(w.w1 @ mu + mu @ w.w2 @ mu)
    negentropy = float(np.sum(mu * np.log(mu) + (1 - mu) * np.log(1 - mu)))
    return energy - negentropy


def foc_map(mu, w: WeightSystem) -> np.ndarray:
    """One simultaneous application of the first-order-condition map."""
    return expit(w.w1 + 2.0 * (w.w2 @ mu))


def foc_residual(mu, w: WeightSystem) -> float:
    """Sup-norm distance of mu from the first-order-condition map."""
    return float(np.abs(mu - foc_map(mu, w)).max())


def contraction_certificate(
    theta: ThetaParams, m_upper: float, max_degree: int
) -> bool:
    """True when a_n * m_upper * (|theta5| + |theta6|) * max_degree <= 4.

    Under this condition the fixed-point iteration is a contraction, so it
    converges to the unique maximizer from any initialization.
    """
    magnitude = theta.a_n * m_upper * (abs(theta.theta5) + abs(theta.theta6))
    return magnitude * max_degree <= 4.0


def instance_certified(instance: Instance) -> bool:
    return contraction_certificate(
        instance.theta, instance.m_upper, instance.net.max_degree
    )


def _sigmoid(a: float) -> float:
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def _sweep_gauss_seidel(mu: np.ndarray, w: WeightSystem, clamp: float) -> np.ndarray:
    w1, w2 = w.w1, w.w2
    lo, hi = clamp, 1.0 - clamp
    for i in range(mu.shape[0]):
        v = _sigmoid(w1[i] + 2.0 * float(w2[i] @ mu))
        mu[i] = min(max(v, lo), hi)
    return mu


def _sweep_jacobi(mu: np.ndarray, w: WeightSystem, clamp: float) -> np.ndarray:
    return _clamped(foc_map(mu, w), clamp)


def fixed_point_solve(
    w: WeightSystem,
    settings: SolverSettings | None = None,
    seed: int | None = None,
    init: np.ndarray | None = None,
    certified: bool = False,
) -> MeanFieldSolution:
    """Iterate the first-order-condition map to a fixed point.

    Starts from ``init`` when given, otherwise from a uniform random draw
    controlled by ``seed``. A sweep updates every unit once; iteration
    stops once the objective increment is at most rho and the FOC residual
    is at most foc_tol, or at max_iter with ``converged`` set to False.
    """
    settings = settings or SolverSettings()
    n = w.n
    if init is not None:
        mu = _clamped(np.asarray(init, dtype=float).copy(), settings.clamp)
    else:
        rng = np.random.default_rng(seed)
        mu = _clamped(rng.uniform(size=n), settings.clamp)
    sweep = _sweep_gauss_seidel if settings.mode == GAUSS_SEIDEL else _sweep_jacobi
    obj = variational_objective(mu, w, settings.clamp)
    converged = False
    iterations = 0
    residual = foc_residual(mu, w)
    for iterations in range(1, settings.max_iter + 1):
        mu = sweep(mu, w, settings.clamp)
        new_obj = variational_objective(mu, w, settings.clamp)
        residual = foc_residual(mu, w)
        if new_obj - obj <= settings.rho and residual <= settings.foc_tol:
            obj = new_obj
            converged = True
            break
        obj = new_obj
    return MeanFieldSolution(
        mu=mu,
        objective=obj,
        iterations=iterations,
        converged=converged,
        foc_residual=residual,
        contraction_certified=certified,
    )


def solve_allocation(
    instance: Instance,
    d,
    settings: SolverSettings | None = None,
    seed: int | None = None,
    init: np.ndarray | None = None,
) -> MeanFieldSolution:
    """Mean-field solution for the weight system induced by an allocation.

    When the contraction certificate fails the solve is repeated from
    ``settings.restarts`` random initializations and the fixed point with
    the best objective is kept; under the certificate a single run finds
    the unique maximizer.
    """
    settings = settings or SolverSettings()
    w = weights(instance, d)
    certified = instance_certified(instance)
    if certified or init is not None or settings.restarts <= 1:
        return fixed_point_solve(w, settings, seed=seed, init=init, certified=certified)
    seeds = np.random.SeedSequence(seed).generate_state(settings.restarts)
    best = None
    for s in seeds:
        sol = fixed_point_solve(w, settings, seed=int(s), certified=certified)
        if best is None or sol.objective > best.objective:
            best = sol
    return best


def approx_welfare(
    d,
    instance: Instance,
    settings: SolverSettings | None = None,
    seed: int | None = None,
    init: np.ndarray | None = None,
) -> float:
    """Approximated equilibrium welfare, the sum of mean-field marginals."""
    return solve_allocation(instance, d, settings, seed=seed, init=init).welfare


@dataclass(frozen=True)
class BatchSolution:
    """Mean-field fixed points for a batch of allocations, one per column."""

    mu: np.ndarray  # (n, batch)
    objectives: np.ndarray
    welfare: np.ndarray
    converged: np.ndarray
    iterations: int


def batch_fixed_point(
    instance: Instance,
    allocations: np.ndarray,
    settings: SolverSettings | None = None,
    seed: int | None = None,
    init: np.ndarray | None = None,
) -> BatchSolution:
    """Solve the fixed-point conditions for many allocations at once.

    Runs the simultaneous-update iteration on an (n, batch) matrix of
    marginals, which turns a candidate sweep into a handful of dense matrix
    products. Intended for certified instances, where the fixed point is
    unique and independent of the update schedule; callers should fall back
    to per-allocation solves when the certificate fails.
    """
    settings = settings or SolverSettings()
    th = instance.theta
    sm = instance.coupling
    dt = np.asarray(allocations, dtype=float).T.copy()  # (n, batch)
    n, batch = dt.shape
    base = th.theta0 + instance.x_effect2
    w1 = (
        base[:, None]
        + (th.theta1 + instance.x_effect3)[:, None] * dt
        + th.a_n * th.theta4 * (sm @ dt)
    )
    if init is not None:
        init = np.asarray(init, dtype=float)
        mu = np.tile(init[:, None], (1, batch)) if init.ndim == 1 else init.copy()
    else:
        rng = np.random.default_rng(seed)
        mu = rng.uniform(size=(n, batch))
    mu = _clamped(mu, settings.clamp)

    def step(cur):
        arg = w1 + th.a_n * (th.theta5 * (sm @ cur) + th.theta6 * dt * (sm @ (dt * cur)))
        return _clamped(expit(arg), settings.clamp)

    def objectives(cur):
        energy = (w1 * cur).sum(axis=0) + 0.5 * th.a_n * (
            th.theta5 * (cur * (sm @ cur)).sum(axis=0)
            + th.theta6 * ((dt * cur) * (sm @ (dt * cur))).sum(axis=0)
        )
        negent = (cur * np.log(cur) + (1 - cur) * np.log(1 - cur)).sum(axis=0)
        return energy - negent

    obj = objectives(mu)
    done = np.zeros(batch, dtype=bool)
    iterations = 0
    for iterations in range(1, settings.max_iter + 1):
        new_mu = step(mu)
        new_obj = objectives(new_mu)
        residual = np.abs(step(new_mu) - new_mu).max(axis=0)
        done = (new_obj - obj <= settings.rho) & (residual <= settings.foc_tol)
        mu, obj = new_mu, new_obj
        if done.all():
            break
    return BatchSolution(
        mu=mu,
        objectives=obj,
        welfare=mu.sum(axis=0),
        converged=done.copy(),
        iterations=iterations,
    )


def with_mode(settings: SolverSettings, mode: str) -> SolverSettings:
    return replace(settings, mode=mode)
