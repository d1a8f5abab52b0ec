"""Structural utility model for the sequential binary-choice network game.

Houses the structural parameters, problem instances, per-unit utilities,
the potential function whose Gibbs measure is the stationary outcome
distribution, logit choice probabilities, and the linear/quadratic weight
system (w1, w2) that the potential factors through:

    Phi(y) = w1'y + y' w2 y.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .network import Network, SimilarityKernel, check_covariates, similarity_matrix

log = logging.getLogger(__name__)

logistic = expit


def logistic_slope(x):
    """Derivative of the logistic function, logistic(x) * (1 - logistic(x))."""
    p = expit(x)
    return p * (1.0 - p)


def _coef_array(value, k: int) -> np.ndarray:
    """Broadcast a scalar or length-K coefficient to a length-K array."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,) and k > 1:
        arr = np.full(k, arr[0])
    if arr.shape != (k,):
        raise ValueError(f"coefficient of shape {arr.shape} incompatible with K={k}")
    return arr


# Benchmark parameter profiles: (theta0, ..., theta6). The second profile
# has spillover terms large enough to break the contraction condition.
PARAM_SETS = {
    1: (-2.0, 0.5, 0.1, 0.6, 0.7, 0.8, 0.9),
    2: (-2.0, 0.5, 0.1, 0.6, 0.7, 7.0, 7.0),
}


@dataclass(frozen=True)
class ThetaParams:
    """Structural parameters theta0..theta6 plus the spillover scaling a_n.

    theta2 and theta3 may be scalars (K = 1, or one shared coefficient per
    covariate column) or length-K sequences. a_n rescales every spillover
    term and must be positive; a_n * max_degree should stay bounded as the
    network grows, which is reported (not enforced) at instance assembly.
    """

    theta0: float
    theta1: float
    theta2: float | tuple
    theta3: float | tuple
    theta4: float
    theta5: float
    theta6: float
    a_n: float = 1.0

    def __post_init__(self):
        if not self.a_n > 0:
            raise ValueError("a_n must be positive")
        for name in ("theta2", "theta3"):
            v = getattr(self, name)
            if np.ndim(v) > 0:
                object.__setattr__(self, name, tuple(float(u) for u in v))

    @classmethod
    def from_set(cls, set_id: int, a_n: float = 1.0) -> "ThetaParams":
        if set_id not in PARAM_SETS:
            raise ValueError(f"unknown parameter set {set_id}")
        return cls(*PARAM_SETS[set_id], a_n=a_n)

    @classmethod
    def from_dict(cls, d: dict) -> "ThetaParams":
        kwargs = {f"theta{k}": d[f"theta{k}"] for k in range(7)}
        kwargs["a_n"] = float(d.get("a_n", 1.0))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for k in range(7):
            v = getattr(self, f"theta{k}")
            out[f"theta{k}"] = list(v) if isinstance(v, tuple) else v
        out["a_n"] = self.a_n
        return out

    def replace_a_n(self, a_n: float) -> "ThetaParams":
        return ThetaParams(
            self.theta0, self.theta1, self.theta2, self.theta3,
            self.theta4, self.theta5, self.theta6, a_n=a_n,
        )


def default_a_n(n: int, sparse: bool) -> float:
    """Spillover scaling convention: 1 for sparse networks, 1/N for dense."""
    return 1.0 if sparse else 1.0 / n


@dataclass(frozen=True)
class Allocation:
    """Binary treatment vector with its treated index set."""

    d: np.ndarray
    treated: tuple

    @classmethod
    def from_vector(cls, d) -> "Allocation":
        d = np.asarray(d, dtype=np.int8)
        if not np.isin(d, (0, 1)).all():
            raise ValueError("allocation entries must be 0 or 1")
        return cls(d=d, treated=tuple(int(i) for i in np.flatnonzero(d)))

    @classmethod
    def from_treated(cls, n: int, treated) -> "Allocation":
        d = np.zeros(n, dtype=np.int8)
        idx = list(treated)
        d[idx] = 1
        return cls(d=d, treated=tuple(sorted(int(i) for i in idx)))

    @classmethod
    def zeros(cls, n: int) -> "Allocation":
        return cls(d=np.zeros(n, dtype=np.int8), treated=())

    @property
    def count(self) -> int:
        return len(self.treated)

    def with_unit(self, i: int) -> "Allocation":
        d = self.d.copy()
        d[i] = 1
        return Allocation.from_vector(d)


def allocation_vector(d, n: int) -> np.ndarray:
    """Coerce an Allocation or array-like into a validated length-n 0/1 array."""
    if isinstance(d, Allocation):
        vec = d.d
    else:
        vec = np.asarray(d, dtype=np.int8)
    if vec.shape != (n,):
        raise ValueError(f"allocation must have length {n}, got shape {vec.shape}")
    if not np.isin(vec, (0, 1)).all():
        raise ValueError("allocation entries must be 0 or 1")
    return vec


def feasible_allocations(n: int, kappa: int, max_count: int = 2_000_000) -> np.ndarray:
    """All allocations with at most kappa treated units, as a (count, n) matrix.

    Rows are ordered by treated-set size and lexicographically within each
    size, so the first row is the empty allocation.
    """
    if not 0 <= kappa <= n:
        raise ValueError("kappa must be between 0 and n")
    total = sum(_comb(n, k) for k in range(kappa + 1))
    if total > max_count:
        raise ValueError(
            f"{total} feasible allocations exceed the enumeration cap {max_count}"
        )
    out = np.zeros((total, n), dtype=np.int8)
    row = 0
    for k in range(kappa + 1):
        for combo in itertools.combinations(range(n), k):
            out[row, list(combo)] = 1
            row += 1
    return out


def _comb(n, k):
    import math

    return math.comb(n, k)


@dataclass(frozen=True)
class WeightSystem:
    """Linear weights w1 (length N) and symmetric quadratic weights w2 (N x N).

    w2 has zero diagonal; the potential of a configuration y is
    w1'y + y' w2 y.
    """

    w1: np.ndarray
    w2: np.ndarray

    @property
    def n(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class Instance:
    """A full problem instance: network, covariates, parameters, similarity.

    All fields are immutable after construction; derived arrays are cached.
    """

    net: Network
    x: np.ndarray
    theta: ThetaParams
    m: np.ndarray

    def __post_init__(self):
        if self.x.shape[0] != self.net.n:
            raise ValueError(
                f"covariate rows ({self.x.shape[0]}) do not match "
                f"network size ({self.net.n})"
            )
        if self.m.shape != (self.net.n, self.net.n):
            raise ValueError("similarity matrix shape does not match network")

    @property
    def n(self) -> int:
        return self.net.n

    @cached_property
    def coupling(self) -> np.ndarray:
        """Similarity masked by adjacency: entry (i, j) is m_ij * G_ij."""
        return self.m * self.net.adjacency

    @cached_property
    def x_effect2(self) -> np.ndarray:
        k = self.x.shape[1]
        return self.x @ _coef_array(self.theta.theta2, k)

    @cached_property
    def x_effect3(self) -> np.ndarray:
        k = self.x.shape[1]
        return self.x @ _coef_array(self.theta.theta3, k)

    @cached_property
    def m_bounds(self) -> tuple[float, float]:
        """(lower, upper) similarity bounds over distinct pairs."""
        if self.n < 2:
            return 0.0, 0.0
        mask = ~np.eye(self.n, dtype=bool)
        vals = self.m[mask]
        return float(vals.min()), float(vals.max())

    @property
    def m_lower(self) -> float:
        return self.m_bounds[0]

    @property
    def m_upper(self) -> float:
        return self.m_bounds[1]

    @property
    def spillover_scale(self) -> float:
        """a_n times the maximum degree; should stay bounded as networks
        grow for the approximations to behave."""
        return self.theta.a_n * self.net.max_degree


def make_instance(
    net: Network,
    x,
    theta: ThetaParams,
    kernel: SimilarityKernel | None = None,
    m: np.ndarray | None = None,
) -> Instance:
    """Assemble an Instance, building the similarity matrix from a kernel.

    Exactly one of ``kernel`` and ``m`` may be given; the default kernel is
    the L1-distance similarity.
    """
    x = check_covariates(x)
    if m is None:
        kernel = kernel or SimilarityKernel.abs_diff()
        m = similarity_matrix(x, kernel)
    elif kernel is not None:
        raise ValueError("pass either kernel or m, not both")
    else:
        m = np.asarray(m, dtype=float)
        if not np.array_equal(m, m.T):
            raise ValueError("similarity matrix must be symmetric")
        if (m < 0).any():
            raise ValueError("similarity entries must be nonnegative")
    instance = Instance(net=net, x=x, theta=theta, m=m)
    if instance.spillover_scale > 10.0:
        log.info(
            "spillover scale a_n * max_degree = %.3g is large; consider a "
            "smaller a_n for this network",
            instance.spillover_scale,
        )
    return instance


def weights(instance: Instance, d) -> WeightSystem:
    """Weight system (w1, w2) induced by a treatment allocation.

    w1_i collects every term linear in y_i: the intercept, own treatment,
    covariate effects, and scaled treatment externalities from treated
    neighbors. w2_ij = (a_n / 2) * m_ij * G_ij * (theta5 + theta6 d_i d_j)
    carries the choice spillovers.
    """
    th = instance.theta
    d = allocation_vector(d, instance.n)
    sm = instance.coupling
    w1 = (
        th.theta0
        + th.theta1 * d
        + instance.x_effect2
        + instance.x_effect3 * d
        + th.a_n * th.theta4 * (sm @ d)
    )
    w2 = 0.5 * th.a_n * sm * (th.theta5 + th.theta6 * np.outer(d, d))
    return WeightSystem(w1=w1, w2=w2)


def utility(i: int, y, instance: Instance, d) -> float:
    """Utility of unit i choosing y_i relative to choosing 0.

    Only the coordinates y_j with j a neighbor of i matter besides y_i
    itself; utility is identically 0 whenever y_i = 0.
    """
    y = np.asarray(y, dtype=float)
    d = allocation_vector(d, instance.n)
    if y[i] == 0:
        return 0.0
    th = instance.theta
    sm_row = instance.coupling[i]
    linear = (
        th.theta0
        + th.theta1 * d[i]
        + instance.x_effect2[i]
        + instance.x_effect3[i] * d[i]
        + th.a_n * th.theta4 * float(sm_row @ d)
    )
    interact = th.a_n * float(sm_row @ ((th.theta5 + th.theta6 * d[i] * d) * y))
    # sm_row[i] = 0, so the j = i term vanishes from the interaction sum.
    return float(linear * y[i] + interact * y[i])


def potential(y, instance: Instance, d) -> float:
    """Potential of a configuration; unilateral-change differences in the
    potential equal the corresponding utility differences."""
    w = weights(instance, d)
    y = np.asarray(y, dtype=float)
    return float(w.w1 @ y + y @ w.w2 @ y)


def choice_argument(i: int, y, w: WeightSystem) -> float:
    """Log-odds of unit i choosing 1 given everyone else's choices."""
    y = np.asarray(y, dtype=float)
    return float(w.w1[i] + 2.0 * (w.w2[i] @ y))


def conditional_choice_prob(i: int, y, instance: Instance, d) -> float:
    """Probability unit i chooses 1 given the other units' choices y.

    Equals logistic(U_i(1, y_-i)) because the utility of choosing 0 is
    normalized to zero. The entry y[i] is ignored.
    """
    w = weights(instance, d)
    return float(expit(choice_argument(i, y, w)))
