"""Ambiguity-set generators and exact counting of consistent labelings.

``bits[s, i]`` is true iff label i is in the ambiguity set of vertex s of the
second graph. Every generator keeps the true label in its row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import (
    DimensionMismatch,
    InvalidFamilyParams,
    NonIntegralSeedCount,
    OutOfRange,
    TooLarge,
    UnequalMarginals,
)
from .graphgen import as_generator
from .model import Labeling

PERMANENT_MAX_N = 30


@dataclass(frozen=True)
class AmbiguityMatrix:
    bits: np.ndarray
    model_tag: str = "explicit"

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool, copy=True)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionMismatch(f"ambiguity matrix must be square, got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def row_sizes(self) -> np.ndarray:
        return self.bits.sum(axis=1)

    def contains(self, sigma: Labeling) -> bool:
        return bool(np.all(self.bits[np.arange(self.n), sigma.perm]))

    def to_text(self) -> str:
        rows = ["".join("1" if v else "0" for v in row) for row in self.bits]
        return "\n".join([str(self.n), *rows]) + "\n"

    @classmethod
    def from_text(cls, text: str, model_tag: str = "file") -> AmbiguityMatrix:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        n = int(lines[0])
        rows = lines[1:]
        if len(rows) != n or any(len(r) != n or set(r) - {"0", "1"} for r in rows):
            raise DimensionMismatch(f"expected {n} rows of {n} '0'/'1' characters")
        return cls(np.array([[c == "1" for c in r] for r in rows]), model_tag)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> AmbiguityMatrix:
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class SeededParams:
    gamma: float


@dataclass(frozen=True)
class EquiprobableParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise OutOfRange(f"p must lie in [0, 1], got {self.p}")


# --- distributions of the per-label inclusion probability -----------------


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidFamilyParams(f"Beta needs a, b > 0, got {self.a}, {self.b}")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.beta(self.a, self.b, size)

    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class PointMass:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidFamilyParams(f"PointMass needs p in [0, 1], got {self.p}")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(size, self.p)

    def mean(self) -> float:
        return self.p


@dataclass(frozen=True)
class TruncatedGaussian:
    """Normal(mu, var) conditioned on [0, 1]."""

    mu: float
    var: float
    _dist: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.var > 0):
            raise InvalidFamilyParams(f"TruncatedGaussian needs finite mu and var > 0, got {self.mu}, {self.var}")
        sd = math.sqrt(self.var)
        d = stats.truncnorm((0.0 - self.mu) / sd, (1.0 - self.mu) / sd, loc=self.mu, scale=sd)
        if not d.cdf(1.0) > 0 or not math.isfinite(d.mean()):
            raise InvalidFamilyParams("truncation interval carries no mass")
        object.__setattr__(self, "_dist", d)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return np.clip(self._dist.rvs(size=size, random_state=rng), 0.0, 1.0)

    def mean(self) -> float:
        return float(self._dist.mean())


def parse_family(text: str):
    """``beta:a,b`` | ``point:p`` | ``tgauss:mu,var``."""
    try:
        name, _, args = text.partition(":")
        vals = [float(v) for v in args.split(",")] if args else []
        name = name.strip().lower()
        if name == "beta" and len(vals) == 2:
            return Beta(*vals)
        if name in ("point", "pointmass") and len(vals) == 1:
            return PointMass(*vals)
        if name in ("tgauss", "truncatedgaussian") and len(vals) == 2:
            return TruncatedGaussian(*vals)
    except ValueError as exc:
        if isinstance(exc, InvalidFamilyParams):
            raise
        raise InvalidFamilyParams(f"cannot parse family {text!r}") from exc
    raise InvalidFamilyParams(f"cannot parse family {text!r}")


@dataclass(frozen=True)
class RandomPParams:
    family: object

    def __post_init__(self):
        if not (hasattr(self.family, "sample") and hasattr(self.family, "mean")):
            raise InvalidFamilyParams("family must provide sample() and mean()")


@dataclass(frozen=True)
class SymmetricParams:
    """Joint law of the pair (bits[s, truth(t)], bits[t, truth(s)])."""

    puv: np.ndarray

    def __post_init__(self):
        puv = np.array(self.puv, dtype=float)
        if puv.shape != (2, 2) or np.any(puv < 0) or abs(puv.sum() - 1.0) > 1e-9:
            raise InvalidFamilyParams(f"P_UV must be a 2x2 distribution, got {puv.tolist()}")
        if abs(puv[1].sum() - puv[:, 1].sum()) > 1e-12:
            raise UnequalMarginals(f"P_U(1)={puv[1].sum()} differs from P_V(1)={puv[:, 1].sum()}")
        puv = puv / puv.sum()
        puv.setflags(write=False)
        object.__setattr__(self, "puv", puv)

    @classmethod
    def from_marginal(cls, puv11: float, pu1: float) -> SymmetricParams:
        off = pu1 - puv11
        return cls(np.array([[1.0 - 2.0 * pu1 + puv11, off], [off, puv11]]))

    @property
    def pu1(self) -> float:
        return float(self.puv[1].sum())

    @property
    def theta(self) -> float:
        return max(float(self.puv[1, 1]), self.pu1 * float(self.puv[:, 1].sum()))


# --- generators ------------------------------------------------------------


def _finish(bits: np.ndarray, truth: Labeling, tag: str) -> AmbiguityMatrix:
    bits[np.arange(truth.n), truth.perm] = True
    return AmbiguityMatrix(bits, tag)


def seed_count(n: int, gamma: float) -> int:
    k = gamma * n
    if not (0.0 <= gamma <= 1.0) or abs(k - round(k)) > 1e-9:
        raise NonIntegralSeedCount(f"gamma * n = {k} is not an integer in [0, {n}]")
    return int(round(k))


def gen_seeded(n: int, truth: Labeling, params: SeededParams, rng) -> AmbiguityMatrix:
    k = seed_count(n, params.gamma)
    gen = as_generator(rng)
    bits = np.ones((n, n), dtype=bool)
    seeds = gen.choice(n, size=k, replace=False)
    bits[seeds] = False
    return _finish(bits, truth, f"seeded(gamma={params.gamma})")


def gen_equiprobable(n: int, truth: Labeling, params: EquiprobableParams, rng) -> AmbiguityMatrix:
    gen = as_generator(rng)
    bits = gen.random((n, n)) < params.p
    return _finish(bits, truth, f"equiprobable(p={params.p})")


def gen_random_p(n: int, truth: Labeling, params: RandomPParams, rng) -> AmbiguityMatrix:
    gen = as_generator(rng)
    # one inclusion probability per label (column), shared by all rows
    col_p = np.asarray(params.family.sample(n, gen), dtype=float)
    bits = gen.random((n, n)) < col_p[None, :]
    return _finish(bits, truth, f"randomp({params.family})")


def gen_symmetric(n: int, truth: Labeling, params: SymmetricParams, rng) -> AmbiguityMatrix:
    gen = as_generator(rng)
    s, t = np.triu_indices(n, 1)
    # outcome k encodes (u, v) = divmod(k, 2)
    outcome = gen.choice(4, size=s.size, p=params.puv.ravel())
    u, v = np.divmod(outcome, 2)
    bits = np.zeros((n, n), dtype=bool)
    bits[s, truth.perm[t]] = u.astype(bool)
    bits[t, truth.perm[s]] = v.astype(bool)
    return _finish(bits, truth, f"symmetric(puv={params.puv.tolist()})")


def generate(scenario: str, n: int, truth: Labeling, params, rng) -> AmbiguityMatrix:
    gens = {
        "seeded": gen_seeded,
        "equiprobable": gen_equiprobable,
        "randomp": gen_random_p,
        "symmetric": gen_symmetric,
    }
    try:
        fn = gens[scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}") from None
    return fn(n, truth, params, rng)


# --- counting --------------------------------------------------------------


def permanent_01(bits) -> int:
    """Exact permanent of a 0/1 matrix (Ryser formula, Gray-code order)."""
    a = np.asarray(bits, dtype=np.int64)
    n = a.shape[0]
    if n == 0:
        return 1
    cols = [a[:, j].tolist() for j in range(n)]
    row_sums = [0] * n
    total = 0
    subset = 0
    for k in range(1, 1 << n):
        # bit flipped between consecutive Gray codes
        j = (k & -k).bit_length() - 1
        subset ^= 1 << j
        col = cols[j]
        if subset >> j & 1:
            for r in range(n):
                row_sums[r] += col[r]
        else:
            for r in range(n):
                row_sums[r] -= col[r]
        prod = 1
        for v in row_sums:
            if v == 0:
                prod = 0
                break
            prod *= v
        if prod:
            size = bin(subset).count("1")
            total += -prod if (n - size) & 1 else prod
    return total


def count_consistent_labelings_exact(B: AmbiguityMatrix) -> int:
    if B.n > PERMANENT_MAX_N:
        raise TooLarge(f"exact count capped at n={PERMANENT_MAX_N}, got {B.n}")
    return permanent_01(B.bits)


def derangements(m: int) -> int:
    d_prev, d = 1, 0  # D(0), D(1)
    if m == 0:
        return 1
    for k in range(2, m + 1):
        d_prev, d = d, (k - 1) * (d + d_prev)
    return d


def count_labelings_at_distance(n: int, i: int) -> int:
    """Number of labelings agreeing with a fixed one on exactly i vertices."""
    if not (0 <= i <= n) or n > 20:
        raise OutOfRange(f"need 0 <= i <= n <= 20, got n={n}, i={i}")
    return math.comb(n, i) * derangements(n - i)
