"""Sampling correlated Erdos-Renyi graph pairs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidN
from .model import EdgeDistribution, GraphPair, Labeling


@dataclass(frozen=True)
class RngStream:
    """Deterministic substream keyed by (master_seed, stream_id[, sub-keys]).

    Streams are derived with ``numpy.random.SeedSequence`` spawn keys, so
    distinct ids give statistically independent generators and the same id
    always reproduces the same draws.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def child(self, key: int) -> RngStream:
        return RngStream(self.master_seed, self.stream_id, self.path + (key,))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def relabel(adj, sigma: Labeling) -> np.ndarray:
    """Return ``out`` with ``out[sigma(i), sigma(j)] = adj[i, j]``."""
    a = np.asarray(adj)
    if a.shape != (sigma.n, sigma.n):
        raise DimensionMismatch(f"adjacency shape {a.shape} vs labeling size {sigma.n}")
    inv = sigma.inverse().perm
    return a[np.ix_(inv, inv)]


def sample_pair(n: int, dist: EdgeDistribution, truth="uniform-random", rng=None) -> GraphPair:
    """Draw one correlated pair.

    Each unordered label pair gets one draw (x, y) from the joint law; x goes
    to the first graph and y to the second graph's vertices carrying those
    labels under ``truth``.
    """
    if n < 2:
        raise InvalidN(f"need n >= 2, got {n}")
    gen = as_generator(rng)
    if isinstance(truth, str):
        if truth != "uniform-random":
            raise ValueError(f"unknown truth option {truth!r}")
        truth = Labeling.random(n, gen)
    elif truth.n != n:
        raise DimensionMismatch("truth labeling size does not match n")

    ell = dist.ell
    cdf = np.cumsum(dist.joint.ravel())
    cdf[-1] = 1.0
    iu = np.triu_indices(n, 1)
    u = gen.random(iu[0].size)
    # side="right" never lands on zero-probability cells
    flat = np.searchsorted(cdf, u, side="right")
    flat = np.minimum(flat, ell * ell - 1)
    x, y = np.divmod(flat, ell)

    g1 = np.zeros((n, n), dtype=np.int64)
    g1[iu] = x
    g1 = g1 + g1.T
    aligned2 = np.zeros((n, n), dtype=np.int64)
    aligned2[iu] = y
    aligned2 = aligned2 + aligned2.T
    adj2 = relabel(aligned2, truth.inverse())
    return GraphPair(g1, adj2, truth, dist)


def dump_edge_list(pair: GraphPair, path) -> None:
    """One line per label pair: ``i j attr1 attr2`` (1-based, i < j).

    attr2 is read from the second graph after aligning it by the truth.
    """
    aligned = relabel(pair.adj2, pair.truth)
    lines = []
    for i in range(pair.n):
        for j in range(i + 1, pair.n):
            lines.append(f"{i + 1} {j + 1} {pair.adj1[i, j]} {aligned[i, j]}")
    Path(path).write_text("\n".join(lines) + "\n")
