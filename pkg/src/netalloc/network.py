"""Social networks, covariate matrices, and pairwise similarity kernels.

Networks are undirected simple graphs stored as dense 0/1 adjacency
matrices. Covariates are nonnegative N x K arrays, one row per unit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Network:
    """Undirected simple graph on units 0..n-1.

    The adjacency matrix must be symmetric, binary, and zero on the
    diagonal (no self-links). Instances are immutable and safe to share
    across workers.
    """

    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if (np.diag(a) != 0).any():
            raise ValueError("self-links not allowed")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")

    @classmethod
    def from_adjacency(cls, adjacency) -> "Network":
        a = np.asarray(adjacency, dtype=np.int8)
        return cls(n=a.shape[0], adjacency=a)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Network":
        """Build a network from an iterable of (i, j) pairs.

        Duplicate and reversed pairs collapse to a single undirected edge.
        """
        a = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-links not allowed: ({i},{j})")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            a[i, j] = 1
            a[j, i] = 1
        return cls(n=n, adjacency=a)

    @cached_property
    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @cached_property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.n else 0

    @cached_property
    def min_degree(self) -> int:
        return int(self.degree.min()) if self.n else 0

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def erdos_renyi(n: int, density: float, seed: int) -> Network:
    """Uniform random simple graph with a fixed number of edges.

    The edge count is round(density * n * (n - 1) / 2), rounding half up,
    and the edge set is drawn uniformly without replacement from all
    unordered pairs. Deterministic given the seed.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must be in (0, 1]")
    n_pairs = n * (n - 1) // 2
    n_edges = int(np.floor(density * n_pairs + 0.5))
    if n_edges == 0:
        warnings.warn(
            f"degenerate density: {density} yields zero edges on {n} units",
            UserWarning,
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n_pairs, size=n_edges, replace=False)
    iu, ju = np.triu_indices(n, k=1)
    a = np.zeros((n, n), dtype=np.int8)
    a[iu[chosen], ju[chosen]] = 1
    a[ju[chosen], iu[chosen]] = 1
    return Network(n=n, adjacency=a)


def degree_stats(net: Network) -> tuple[int, int]:
    """Return (max degree, min degree) of the network."""
    return net.max_degree, net.min_degree


@dataclass(frozen=True)
class SimilarityKernel:
    """Pairwise similarity m(X_i, X_j), symmetric and nonnegative.

    Variants:
      * ``absdiff``  - L1 distance between covariate rows
      * ``invdist``  - 1 / (1 + L1 distance)
      * ``constant`` - a fixed positive value for every pair
    """

    kind: str
    value: float = 1.0

    _KINDS = ("absdiff", "invdist", "constant")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant kernel value must be positive")

    @classmethod
    def abs_diff(cls) -> "SimilarityKernel":
        return cls("absdiff")

    @classmethod
    def inverse_distance(cls) -> "SimilarityKernel":
        return cls("invdist")

    @classmethod
    def constant(cls, value: float) -> "SimilarityKernel":
        return cls("constant", float(value))

    @classmethod
    def parse(cls, spec: str) -> "SimilarityKernel":
        """Parse 'absdiff', 'invdist', or 'constant:<value>'."""
        if ":" in spec:
            kind, _, raw = spec.partition(":")
            return cls(kind.strip(), float(raw))
        return cls(spec.strip())


def check_covariates(x) -> np.ndarray:
    """Validate and return covariates as a float (N, K) array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"covariates must be 2-dimensional, got shape {x.shape}")
    if (x < 0).any():
        raise ValueError("covariates must be nonnegative")
    return x


def similarity_matrix(x, kernel: SimilarityKernel) -> np.ndarray:
    """Pairwise similarity matrix for the given covariates and kernel.

    The result is exactly symmetric with nonnegative entries. The diagonal
    is computed but never enters any downstream quantity because the
    adjacency matrix has zero diagonal.
    """
    x = check_covariates(x)
    n = x.shape[0]
    if kernel.kind == "constant":
        return np.full((n, n), kernel.value, dtype=float)
    l1 = np.abs(x[:, None, :] - x[None, :, :]).sum(axis=-1)
    if kernel.kind == "absdiff":
        return l1
    return 1.0 / (1.0 + l1)


def load_network(path, n: int | None = None) -> Network:
    """Read an edge list file into a Network.

    The file holds one "i,j" pair per line with 0-based unit indices.
    Blank lines and lines starting with '#' are ignored. Duplicate and
    reversed pairs are deduplicated. If ``n`` is omitted it is inferred
    as one plus the largest index seen.
    """
    edges = []
    max_idx = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i,j', got {line!r}")
            i, j = int(parts[0]), int(parts[1])
            if i == j:
                raise ValueError(f"{path}:{lineno}: self-links not allowed")
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative unit index")
            edges.append((i, j))
            max_idx = max(max_idx, i, j)
    if n is None:
        n = max_idx + 1
    elif max_idx >= n:
        raise ValueError(f"edge index {max_idx} out of range for n={n}")
    return Network.from_edges(n, edges)


def load_covariates(path) -> np.ndarray:
    """Read a covariate CSV (header row, one row per unit) as an (N, K) array."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float, ndmin=2)
    if np.isnan(data).any():
        raise ValueError(f"{path}: non-numeric or missing covariate entries")
    return check_covariates(data)
