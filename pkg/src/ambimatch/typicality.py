"""Joint types and the strong-typicality test on UT vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .model import EdgeDistribution, UTVector

DEFAULT_EPS_CONSTANT = 2.0
# slack for float round-off at closed boundaries, in counts
_COUNT_SLACK = 1e-9


@dataclass(frozen=True)
class JointType:
    counts: np.ndarray

    @property
    def ell(self) -> int:
        return self.counts.shape[0]

    @property
    def length(self) -> int:
        return int(self.counts.sum())

    @property
    def freq(self) -> np.ndarray:
        return self.counts / max(self.length, 1)


@dataclass(frozen=True)
class TypicalityParams:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def _data(u) -> np.ndarray:
    return u.data if isinstance(u, UTVector) else np.asarray(u, dtype=np.int64)


def joint_type(u1, u2, ell: int | None = None) -> JointType:
    a, b = _data(u1), _data(u2)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if ell is None:
        ell = int(max(a.max(initial=0), b.max(initial=0))) + 1
    counts = np.bincount(a * ell + b, minlength=ell * ell).reshape(ell, ell)
    return JointType(counts)


def count_bounds(dist: EdgeDistribution, length: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer count window [lo, hi] per cell for a typical joint type."""
    p = dist.joint
    hi = np.floor((p + epsilon) * length + _COUNT_SLACK).astype(np.int64)
    lo = np.ceil((p - epsilon) * length - _COUNT_SLACK).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.where(dist.support_mask, hi, 0)
    lo = np.where(dist.support_mask, lo, 0)
    return lo, hi


def counts_typical(counts: np.ndarray, dist: EdgeDistribution, epsilon: float) -> bool:
    lo, hi = count_bounds(dist, int(counts.sum()), epsilon)
    return bool(np.all(counts >= lo) and np.all(counts <= hi))


def is_jointly_typical(u1, u2, dist: EdgeDistribution, params) -> bool:
    """Closed epsilon test per cell, plus exact zeros off the support."""
    eps = params.epsilon if isinstance(params, TypicalityParams) else float(params)
    t = joint_type(u1, u2, dist.ell)
    return counts_typical(t.counts, dist, eps)


def default_epsilon(n: int, dist: EdgeDistribution | None = None, c: float = DEFAULT_EPS_CONSTANT) -> float:
    """c * sqrt(log N / N) with N = n(n-1)/2.

    Passing ``dist`` caps the result at half the smallest nonzero joint
    probability.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    big_n = n * (n - 1) // 2
    # N = 1 would give zero; keep the test meaningful
    eps = c * math.sqrt(math.log(big_n) / big_n) if big_n > 1 else c
    if dist is not None:
        eps = min(eps, 0.5 * dist.min_nonzero())
    return eps
