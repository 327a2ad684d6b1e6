"""Core domain types: edge distributions, labelings, graph pairs, UT vectors.

Vertices and labels are stored 0-based. The first graph's labeling is fixed
to the identity, so ``GraphPair.truth`` is the only hidden permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricInput,
    DimensionMismatch,
    NegativeEntry,
    NonSquare,
    NotNormalized,
)

NORMALIZATION_TOL = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EdgeDistribution:
    """Joint law P_{X,Y} of the attribute pair on an aligned vertex pair."""

    joint: np.ndarray
    marginal_x: np.ndarray = field(init=False, repr=False)
    marginal_y: np.ndarray = field(init=False, repr=False)
    support_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        joint = _frozen(np.asarray(self.joint, dtype=float))
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "marginal_x", _frozen(joint.sum(axis=1)))
        object.__setattr__(self, "marginal_y", _frozen(joint.sum(axis=0)))
        object.__setattr__(self, "support_mask", _frozen(joint > 0))

    @property
    def ell(self) -> int:
        return self.joint.shape[0]

    def conditional_y_given_x(self) -> np.ndarray:
        """Row-stochastic P_{Y|X}; rows with P_X(x) = 0 are left as zeros."""
        cond = np.zeros_like(self.joint)
        ok = self.marginal_x > 0
        cond[ok] = self.joint[ok] / self.marginal_x[ok, None]
        return cond

    def product(self) -> np.ndarray:
        return np.outer(self.marginal_x, self.marginal_y)

    def min_nonzero(self) -> float:
        return float(self.joint[self.support_mask].min())

    def __eq__(self, other):
        return isinstance(other, EdgeDistribution) and np.array_equal(self.joint, other.joint)

    def __hash__(self):
        return hash(self.joint.tobytes())


def validate_distribution(raw) -> EdgeDistribution:
    """Check a raw square matrix and return it as a normalized distribution.

    Sums within 1e-6 of one are accepted and renormalized exactly.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"distribution must be a square matrix, got shape {a.shape}")
    if a.shape[0] < 2:
        raise NonSquare("alphabet size must be at least 2")
    if not np.all(np.isfinite(a)):
        raise NegativeEntry("distribution entries must be finite")
    if np.any(a < 0):
        raise NegativeEntry("distribution entries must be nonnegative")
    total = a.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"entries sum to {total!r}, expected 1")
    return EdgeDistribution(a / total)


def product_distribution(px, py) -> EdgeDistribution:
    return validate_distribution(np.outer(px, py))


def load_distribution(path) -> EdgeDistribution:
    """Read the text format: first line ell, then ell rows of ell numbers."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 1:
        raise NonSquare(f"{path}: first line must hold the alphabet size")
    ell = int(lines[0][0])
    rows = lines[1:]
    if len(rows) != ell or any(len(r) != ell for r in rows):
        raise NonSquare(f"{path}: expected {ell} rows of {ell} values")
    return validate_distribution([[float(v) for v in r] for r in rows])


def dump_distribution(dist: EdgeDistribution, path) -> None:
    lines = [str(dist.ell)]
    lines += [" ".join(repr(float(v)) for v in row) for row in dist.joint]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Labeling:
    """A bijection on {0, ..., n-1}; ``perm[s]`` is the label of vertex s."""

    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
            raise ValueError(f"not a permutation: {p.tolist()}")
        object.__setattr__(self, "perm", _frozen(p))

    @classmethod
    def identity(cls, n: int) -> Labeling:
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Labeling:
        return cls(rng.permutation(n))

    @property
    def n(self) -> int:
        return self.perm.size

    def __call__(self, s: int) -> int:
        return int(self.perm[s])

    def inverse(self) -> Labeling:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.n)
        return Labeling(inv)

    def compose(self, other: Labeling) -> Labeling:
        """``(self o other)(s) = self(other(s))``."""
        if other.n != self.n:
            raise DimensionMismatch("labelings act on different vertex counts")
        return Labeling(self.perm[other.perm])

    def hamming(self, other: Labeling) -> int:
        if other.n != self.n:
            raise DimensionMismatch("labelings act on different vertex counts")
        return int(np.count_nonzero(self.perm != other.perm))

    def fixed_points(self) -> int:
        return int(np.count_nonzero(self.perm == np.arange(self.n)))

    def __eq__(self, other):
        return isinstance(other, Labeling) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())

    def __repr__(self):
        return f"Labeling({self.perm.tolist()})"


@dataclass(frozen=True)
class UTVector:
    n: int
    data: np.ndarray

    def __post_init__(self):
        d = _frozen(np.asarray(self.data, dtype=np.int64))
        if d.shape != (self.n * (self.n - 1) // 2,):
            raise DimensionMismatch(f"UT vector for n={self.n} needs length {self.n * (self.n - 1) // 2}")
        object.__setattr__(self, "data", d)

    def __len__(self):
        return self.data.size


@dataclass(frozen=True)
class GraphPair:
    """Two attribute matrices over the same n vertices.

    ``adj1`` is indexed by label (the first graph's labeling is the identity).
    ``adj2`` is indexed by vertex of the second graph; relabeling it by
    ``truth`` aligns it with ``adj1``.
    """

    adj1: np.ndarray
    adj2: np.ndarray
    truth: Labeling
    dist: EdgeDistribution

    def __post_init__(self):
        for name in ("adj1", "adj2"):
            a = _frozen(np.asarray(getattr(self, name), dtype=np.int64))
            check_adjacency(a, self.dist.ell)
            object.__setattr__(self, name, a)
        if self.adj1.shape != self.adj2.shape or self.truth.n != self.adj1.shape[0]:
            raise DimensionMismatch("adjacency matrices and labeling disagree on n")

    @property
    def n(self) -> int:
        return self.adj1.shape[0]

    def ut1(self) -> UTVector:
        return ut_of(self.adj1)

    def ut2(self, sigma: Labeling | None = None) -> UTVector:
        """UT of the second graph under labeling ``sigma`` (default: truth)."""
        from .graphgen import relabel

        return ut_of(relabel(self.adj2, self.truth if sigma is None else sigma))


def check_adjacency(adj: np.ndarray, ell: int | None = None) -> None:
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise NonSquare(f"adjacency must be square, got shape {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise AsymmetricInput("adjacency matrix is not symmetric")
    if np.any(np.diag(adj) != 0):
        raise AsymmetricInput("adjacency diagonal must be zero")
    if ell is not None and adj.size and (adj.min() < 0 or adj.max() >= ell):
        raise DimensionMismatch(f"attributes must lie in [0, {ell - 1}]")


def ut_index(i: int, j: int, n: int) -> int:
    """Position of the unordered pair {i, j} (0-based vertices) in a UT vector."""
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"invalid pair ({i}, {j}) for n={n}")
    if i > j:
        i, j = j, i
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


def ut_of(adj) -> UTVector:
    a = np.asarray(adj)
    check_adjacency(a)
    n = a.shape[0]
    iu = np.triu_indices(n, 1)
    return UTVector(n, a[iu])


def induced_ut_permutation(sigma: Labeling, n: int | None = None) -> np.ndarray:
    """Pair permutation induced by a vertex permutation.

    ``out[k]`` is the UT position of {sigma(i), sigma(j)} where k is the
    position of {i, j}. Relabeling an adjacency matrix by sigma moves UT
    entry k to position ``out[k]``.
    """
    n = sigma.n if n is None else n
    if n != sigma.n:
        raise DimensionMismatch("labeling size does not match n")
    i, j = np.triu_indices(n, 1)
    a = sigma.perm[i]
    b = sigma.perm[j]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * (2 * n - lo - 1) // 2 + (hi - lo - 1)
