"""Typicality matching: enumerate ambiguity-consistent labelings, keep the
jointly typical ones, pick one uniformly at random.

The search is exponential in the worst case. It assigns vertices of the
second graph most-constrained first and prunes a partial labeling as soon as
the joint type of the already-decided UT positions cannot be completed to a
typical one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .ambiguity import AmbiguityMatrix
from .errors import DimensionMismatch
from .graphgen import as_generator
from .model import GraphPair, Labeling
from .typicality import TypicalityParams, count_bounds, is_jointly_typical

DEFAULT_NODE_BUDGET = 10_000_000
DEFAULT_CANDIDATE_CAP = 100_000


class _Search:
    """Backtracking over perfect matchings of the vertex/label bipartite graph."""

    def __init__(self, B: AmbiguityMatrix, budget: int, pair: GraphPair | None = None, epsilon: float | None = None):
        n = B.n
        self.n = n
        self.budget = budget
        sizes = B.row_sizes()
        self.order = sorted(range(n), key=lambda s: (int(sizes[s]), s))
        self.options = [np.flatnonzero(B.bits[s]).tolist() for s in self.order]
        self.nodes = 0
        self.truncated = False
        self.typed = pair is not None
        if self.typed:
            if pair.n != n:
                raise DimensionMismatch(f"graph pair has n={pair.n}, ambiguity matrix n={n}")
            dist = pair.dist
            ell = dist.ell
            self.ell = ell
            big_n = n * (n - 1) // 2
            lo, hi = count_bounds(dist, big_n, epsilon)
            self.lo = lo.ravel().tolist()
            self.hi = hi.ravel().tolist()
            self.a1 = pair.adj1.tolist()
            self.a2 = pair.adj2.tolist()
            iu = np.triu_indices(n, 1)
            # the multiset of values on each side is fixed by the graphs alone
            self.tot_x = np.bincount(pair.adj1[iu], minlength=ell).tolist()
            self.tot_y = np.bincount(pair.adj2[iu], minlength=ell).tolist()
            self.counts = [0] * (ell * ell)
            # a cell that can never reach its floor makes everything atypical
            self.dead = not self._completable()

    def _completable(self) -> bool:
        ell = self.ell
        c = self.counts
        for x in range(ell):
            rx = self.tot_x[x] - sum(c[x * ell : (x + 1) * ell])
            for y in range(ell):
                sy = self.tot_y[y] - sum(c[y::ell])
                cell = x * ell + y
                if c[cell] + min(rx, sy) < self.lo[cell]:
                    return False
        return True

    def run(self):
        n = self.n
        if self.typed and self.dead:
            return
        self.assign = [-1] * n
        self.used = [False] * n
        self.placed: list[int] = []
        yield from self._extend(0)

    def _extend(self, depth):
        if depth == self.n:
            yield Labeling(np.array(self.assign))
            return
        v = self.order[depth]
        used = self.used
        placed = self.placed
        assign = self.assign
        for a in self.options[depth]:
            if used[a]:
                continue
            self.nodes += 1
            if self.nodes > self.budget:
                self.truncated = True
                return
            touched = []
            if self.typed:
                ok = True
                ell = self.ell
                row1 = self.a1[a]
                row2 = self.a2[v]
                counts = self.counts
                hi = self.hi
                for u in placed:
                    cell = row1[assign[u]] * ell + row2[u]
                    counts[cell] += 1
                    touched.append(cell)
                    if counts[cell] > hi[cell]:
                        ok = False
                        break
                if ok:
                    ok = self._completable()
                if not ok:
                    for cell in touched:
                        counts[cell] -= 1
                    continue
            used[a] = True
            assign[v] = a
            placed.append(v)
            yield from self._extend(depth + 1)
            placed.pop()
            assign[v] = -1
            used[a] = False
            for cell in touched:
                self.counts[cell] -= 1
            if self.truncated:
                return


class ConsistentEnumeration:
    """Iterable over labelings consistent with B; check ``truncated`` after use."""

    def __init__(self, B: AmbiguityMatrix, budget: int = DEFAULT_NODE_BUDGET):
        self._search = _Search(B, budget)

    def __iter__(self):
        return self._search.run()

    @property
    def truncated(self) -> bool:
        return self._search.truncated

    @property
    def nodes_explored(self) -> int:
        return self._search.nodes


def enumerate_consistent(B: AmbiguityMatrix, budget: int = DEFAULT_NODE_BUDGET) -> ConsistentEnumeration:
    return ConsistentEnumeration(B, budget)


@njit(cache=True)
def _completable(counts, ell, lo, tot_x, tot_y):
    for x in range(ell):
        rx = tot_x[x]
        for y in range(ell):
            rx -= counts[x * ell + y]
        for y in range(ell):
            sy = tot_y[y]
            for z in range(ell):
                sy -= counts[z * ell + y]
            cell = x * ell + y
            if counts[cell] + min(rx, sy) < lo[cell]:
                return False
    return True


@njit(cache=True)
def _unplace(depth, order, assign, used, counts, a1, a2, ell):
    v = order[depth]
    a = assign[v]
    for k in range(depth):
        u = order[k]
        counts[a1[a, assign[u]] * ell + a2[v, u]] -= 1
    assign[v] = -1
    used[a] = False


@njit(cache=True)
def _typed_search(order, opt_ptr, opt_lab, a1, a2, ell, lo, hi, tot_x, tot_y, budget, skip, out):
    """Iterative form of the pruned backtracking in ``_Search``.

    Stores solutions with index in [skip, skip + len(out)) into ``out``.
    Returns (solution count, nodes explored, truncated).
    """
    n = order.size
    cap = out.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    counts = np.zeros(ell * ell, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    nodes = 0
    count = 0
    truncated = False
    if not _completable(counts, ell, lo, tot_x, tot_y):
        return count, nodes, truncated
    depth = 0
    pos[0] = opt_ptr[0]
    while depth >= 0:
        v = order[depth]
        if pos[depth] == opt_ptr[depth + 1]:
            depth -= 1
            if depth >= 0:
                _unplace(depth, order, assign, used, counts, a1, a2, ell)
            continue
        a = opt_lab[pos[depth]]
        pos[depth] += 1
        if used[a]:
            continue
        nodes += 1
        if nodes > budget:
            truncated = True
            break
        ok = True
        done = 0
        for k in range(depth):
            u = order[k]
            cell = a1[a, assign[u]] * ell + a2[v, u]
            counts[cell] += 1
            done = k + 1
            if counts[cell] > hi[cell]:
                ok = False
                break
        if ok:
            ok = _completable(counts, ell, lo, tot_x, tot_y)
        if not ok:
            for k in range(done):
                u = order[k]
                counts[a1[a, assign[u]] * ell + a2[v, u]] -= 1
            continue
        assign[v] = a
        used[a] = True
        if depth == n - 1:
            if skip <= count < skip + cap:
                out[count - skip, :] = assign
            count += 1
            _unplace(depth, order, assign, used, counts, a1, a2, ell)
        else:
            depth += 1
            pos[depth] = opt_ptr[depth]
    return count, nodes, truncated


class _Kernel:
    """Flat arrays for ``_typed_search``."""

    def __init__(self, pair: GraphPair, B: AmbiguityMatrix, epsilon: float, budget: int):
        n = B.n
        if pair.n != n:
            raise DimensionMismatch(f"graph pair has n={pair.n}, ambiguity matrix n={n}")
        sizes = B.row_sizes()
        order = sorted(range(n), key=lambda s: (int(sizes[s]), s))
        opts = [np.flatnonzero(B.bits[s]) for s in order]
        self.order = np.array(order, dtype=np.int64)
        self.opt_ptr = np.concatenate([[0], np.cumsum([o.size for o in opts])]).astype(np.int64)
        self.opt_lab = np.concatenate(opts).astype(np.int64)
        dist = pair.dist
        self.ell = dist.ell
        lo, hi = count_bounds(dist, n * (n - 1) // 2, epsilon)
        self.lo = lo.ravel().astype(np.int64)
        self.hi = hi.ravel().astype(np.int64)
        self.a1 = np.ascontiguousarray(pair.adj1, dtype=np.int64)
        self.a2 = np.ascontiguousarray(pair.adj2, dtype=np.int64)
        iu = np.triu_indices(n, 1)
        self.tot_x = np.bincount(pair.adj1[iu], minlength=self.ell).astype(np.int64)
        self.tot_y = np.bincount(pair.adj2[iu], minlength=self.ell).astype(np.int64)
        self.budget = budget
        self.n = n

    def run(self, skip: int, cap: int):
        out = np.empty((cap, self.n), dtype=np.int64)
        count, nodes, truncated = _typed_search(
            self.order, self.opt_ptr, self.opt_lab, self.a1, self.a2, self.ell,
            self.lo, self.hi, self.tot_x, self.tot_y, self.budget, skip, out,
        )
        stored = max(0, min(cap, count - skip))
        return out[:stored], int(count), int(nodes), bool(truncated)


@dataclass(frozen=True)
class CandidateSet:
    labelings: list[Labeling]
    count: int
    truncated: bool
    nodes_explored: int

    @property
    def capped(self) -> bool:
        return self.count > len(self.labelings)


def typical_candidates(
    pair: GraphPair,
    B: AmbiguityMatrix,
    params: TypicalityParams,
    budget: int = DEFAULT_NODE_BUDGET,
    cap: int = DEFAULT_CANDIDATE_CAP,
    engine: str = "compiled",
) -> CandidateSet:
    """Consistent and jointly typical labelings; stores at most ``cap`` of them.

    ``engine="python"`` runs the reference generator instead of the compiled
    kernel; both visit candidates in the same order.
    """
    if pair.n != B.n:
        raise DimensionMismatch(f"graph pair has n={pair.n}, ambiguity matrix n={B.n}")
    if pair.n == 1:
        return CandidateSet([Labeling.identity(1)], 1, False, 1)
    if engine == "python":
        search = _Search(B, budget, pair, params.epsilon)
        found = []
        count = 0
        for lab in search.run():
            if count < cap:
                found.append(lab)
            count += 1
        return CandidateSet(found, count, search.truncated, search.nodes)
    if engine != "compiled":
        raise ValueError(f"unknown engine {engine!r}")
    rows, count, nodes, truncated = _Kernel(pair, B, params.epsilon, budget).run(0, cap)
    return CandidateSet([Labeling(r) for r in rows], count, truncated, nodes)


def _kth_candidate(pair, B, params, budget, k) -> Labeling:
    rows, _, _, _ = _Kernel(pair, B, params.epsilon, budget).run(k, 1)
    if len(rows) != 1:
        raise RuntimeError("candidate enumeration is not reproducible")
    return Labeling(rows[0])


def accuracy(chosen: Labeling, truth: Labeling) -> float:
    if chosen.n != truth.n:
        raise DimensionMismatch("labelings act on different vertex counts")
    return float(np.count_nonzero(chosen.perm == truth.perm)) / truth.n


@dataclass(frozen=True)
class MatchResult:
    chosen: Labeling | None
    candidate_count: int
    accuracy: float | None
    truncated: bool
    candidates: CandidateSet = field(repr=False)

    @property
    def failed(self) -> bool:
        return self.chosen is None

    @property
    def exact_match(self) -> bool:
        return self.accuracy == 1.0


def tm_match(
    pair: GraphPair,
    B: AmbiguityMatrix,
    params: TypicalityParams,
    rng=None,
    budget: int = DEFAULT_NODE_BUDGET,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> MatchResult:
    cands = typical_candidates(pair, B, params, budget, cap)
    if cands.count == 0:
        if not cands.truncated:
            # the truth is always consistent, so an empty set means it was atypical
            assert not is_jointly_typical(pair.ut1(), pair.ut2(), pair.dist, params)
        return MatchResult(None, 0, None, cands.truncated, cands)
    gen = as_generator(rng)
    k = int(gen.integers(cands.count))
    if k < len(cands.labelings):
        chosen = cands.labelings[k]
    else:
        chosen = _kth_candidate(pair, B, params, budget, k)
    return MatchResult(chosen, cands.count, accuracy(chosen, pair.truth), cands.truncated, cands)
