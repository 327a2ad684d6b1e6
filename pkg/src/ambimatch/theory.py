"""Exponent of the permuted-typicality bound and the matching conditions.

All logarithms are base 2, including the ``log n`` terms of the conditions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .ambiguity import EquiprobableParams, RandomPParams, SeededParams, SymmetricParams, derangements, seed_count
from .errors import (
    AlphaOutOfRange,
    DecayExponentOutOfRange,
    DimensionMismatch,
    InvalidScenarioParams,
    TooLarge,
)
from .model import EdgeDistribution
from .typicality import default_epsilon

INF = math.inf
GOLDEN_TOL = 1e-9
MULTISTART_TOL = 1e-7
UNION_BOUND_MAX_N = 60
SCENARIOS = ("seeded", "equiprobable", "randomp", "symmetric")

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def kl_divergence(p, q) -> float:
    """D(p || q) in bits; ``math.inf`` when p puts mass where q has none."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    pos = p > 0
    if np.any(q[pos] <= 0):
        return INF
    return max(0.0, float(np.sum(p[pos] * np.log2(p[pos] / q[pos]))))


def entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(dist: EdgeDistribution) -> float:
    return kl_divergence(dist.joint, dist.product())


# --- the exponent -------------------------------------------------------------


def feasible_box(dist: EdgeDistribution, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate bounds on t'_X for 0 <= alpha < 1."""
    px = dist.marginal_x
    abar = 1.0 - alpha
    lo = np.maximum((px - alpha) / abar, 0.0)
    hi = np.minimum(px / abar, 1.0)
    return lo, hi


def second_type(dist: EdgeDistribution, alpha: float, t1: np.ndarray) -> np.ndarray:
    """t''_X = (P_X - (1 - alpha) t'_X) / alpha."""
    t2 = (dist.marginal_x - (1.0 - alpha) * t1) / alpha
    return np.where(np.abs(t2) < 1e-15, 0.0, t2)


@lru_cache(maxsize=256)
def _as_lists(dist: EdgeDistribution):
    return dist.joint.tolist(), dist.marginal_x.tolist(), dist.conditional_y_given_x().tolist()


def _kl_list(p, q) -> float:
    total = 0.0
    for a, b in zip(p, q):
        if a > 0:
            if b <= 0:
                return INF
            total += a * math.log2(a / b)
    return max(0.0, total)


def _objective_pair(dist: EdgeDistribution, alpha: float, t1, t2) -> float:
    # plain lists: the alphabets are tiny and this runs in the optimizer's inner loop
    joint, px, cond = _as_lists(dist)
    ell = len(px)
    t1 = list(t1)
    abar = 1.0 - alpha
    val = abar * _kl_list(t1, px) if abar > 0 else 0.0
    if alpha > 0:
        val += alpha * _kl_list([max(v, 0.0) for v in t2], px)
    py2 = [sum(t1[x] * cond[x][y] for x in range(ell)) for y in range(ell)]
    mix_kl = 0.0
    for x in range(ell):
        for y in range(ell):
            p = joint[x][y]
            if p > 0:
                m = abar * px[x] * py2[y] + alpha * p
                mix_kl += p * math.log2(p / m)
    val += max(0.0, mix_kl)
    return 0.5 * val


def exponent_objective(dist: EdgeDistribution, alpha: float, t1) -> float:
    t1 = np.asarray(t1, dtype=float)
    t2 = second_type(dist, alpha, t1) if alpha > 0 else None
    return _objective_pair(dist, alpha, t1, t2)


def _first_type(dist: EdgeDistribution, alpha: float, t2: np.ndarray) -> np.ndarray:
    """t'_X = (P_X - alpha t''_X) / (1 - alpha)."""
    t1 = (dist.marginal_x - alpha * t2) / (1.0 - alpha)
    return np.where(np.abs(t1) < 1e-15, 0.0, t1)


@njit(cache=True)
def _kl_nb(p, q):
    total = 0.0
    for k in range(p.size):
        if p[k] > 0:
            if q[k] <= 0:
                return np.inf
            total += p[k] * np.log2(p[k] / q[k])
    return max(0.0, total)


@njit(cache=True)
def _line_objective(joint, px, cond, alpha, by_second, t, i, j, s):
    """Compiled objective at t + s e_i - s e_j, in either parameterization."""
    ell = px.size
    abar = 1.0 - alpha
    u = t.copy()
    u[i] += s
    u[j] -= s
    if by_second:
        t2 = u
        t1 = (px - alpha * u) / abar
    else:
        t1 = u
        t2 = (px - abar * u) / alpha
    for k in range(ell):
        if abs(t1[k]) < 1e-15:
            t1[k] = 0.0
        if abs(t2[k]) < 1e-15 or t2[k] < 0:
            t2[k] = 0.0
    val = abar * _kl_nb(t1, px) if abar > 0 else 0.0
    if alpha > 0:
        val += alpha * _kl_nb(t2, px)
    mix = np.empty(ell * ell)
    flat = np.empty(ell * ell)
    for x in range(ell):
        for y in range(ell):
            py2 = 0.0
            for z in range(ell):
                py2 += t1[z] * cond[z, y]
            mix[x * ell + y] = abar * px[x] * py2 + alpha * joint[x, y]
            flat[x * ell + y] = joint[x, y]
    val += _kl_nb(flat, mix)
    return 0.5 * val


@dataclass(frozen=True)
class ExponentResult:
    alpha: float
    value: float
    minimizer: np.ndarray
    t_double_prime: np.ndarray | None
    py_double_prime: np.ndarray


def _golden(f, a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal f on [a, b]; endpoints are compared at the end."""
    if b - a <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    best = min((fc, c), (fd, d), (f(a), a), (f(b), b))
    return best[1], best[0]


def _pair_range(t, lo, hi, i, j) -> tuple[float, float]:
    """Range of s such that t + s e_i - s e_j stays in the box."""
    return max(lo[i] - t[i], t[j] - hi[j]), min(hi[i] - t[i], t[j] - lo[j])


def _coordinate_descent(line, t0, lo, hi, tol) -> tuple[np.ndarray, float]:
    t = t0.copy()
    val = line(t, 0, 1, 0.0)
    ell = t.size
    for _ in range(200):
        before = val
        for i in range(ell):
            for j in range(i + 1, ell):
                smin, smax = _pair_range(t, lo, hi, i, j)
                if smax - smin <= 0:
                    continue

                def g(s, i=i, j=j):
                    return line(t, i, j, s)

                s, v = _golden(g, smin, smax, tol * 1e-2)
                if v < val:
                    t[i] += s
                    t[j] -= s
                    val = v
        if before - val < tol * 1e-3:
            break
    return t, val


def _random_feasible(px, lo, hi, rng) -> np.ndarray:
    t = px.copy()
    ell = t.size
    for _ in range(4 * ell):
        i, j = rng.choice(ell, 2, replace=False)
        smin, smax = _pair_range(t, lo, hi, i, j)
        if smax > smin:
            s = rng.uniform(smin, smax)
            t[i] += s
            t[j] -= s
    return t


@lru_cache(maxsize=4096)
def _exponent_cached(dist: EdgeDistribution, alpha: float) -> ExponentResult:
    px = np.array(dist.marginal_x)
    cond = dist.conditional_y_given_x()
    if alpha == 1.0:
        return ExponentResult(1.0, 0.0, px, px.copy(), px @ cond)
    lo, hi = feasible_box(dist, alpha)
    # P_X always lies in the box; the optimizer starts there
    assert np.all(lo <= px + 1e-12) and np.all(px <= hi + 1e-12)
    if alpha == 0.0:
        val = _objective_pair(dist, 0.0, px, None)
        return ExponentResult(0.0, max(0.0, val), px, None, px @ cond)
    # search over whichever of t', t'' is recovered from the other without
    # dividing by a small number; the two parameterizations cover the same set
    by_second = alpha < 0.5
    if by_second:
        with np.errstate(over="ignore"):
            lo = np.maximum((px - (1.0 - alpha)) / alpha, 0.0)
            hi = np.minimum(px / alpha, 1.0)

        def both(t):
            return _first_type(dist, alpha, t), t

    else:

        def both(t):
            return t, second_type(dist, alpha, t)

    f = lambda t: _objective_pair(dist, alpha, *both(t))  # noqa: E731
    if dist.ell == 2:
        a = max(lo[0], 1.0 - hi[1])
        b = min(hi[0], 1.0 - lo[1])
        x, val = _golden(lambda s: f(np.array([s, 1.0 - s])), a, b, GOLDEN_TOL)
        t = np.array([x, 1.0 - x])
    else:
        joint = np.ascontiguousarray(dist.joint)
        line = lambda t, i, j, s: _line_objective(joint, px, cond, alpha, by_second, t, i, j, s)  # noqa: E731
        rng = np.random.default_rng(0)
        starts = [px] + [_random_feasible(px, lo, hi, rng) for _ in range(10)]
        t, val = min((_coordinate_descent(line, s, lo, hi, MULTISTART_TOL) for s in starts), key=lambda r: r[1])
    t1, t2 = both(t)
    return ExponentResult(alpha, max(0.0, val), t1, t2, t1 @ cond)


def exponent(dist: EdgeDistribution, alpha: float) -> ExponentResult:
    """Constrained minimum of the weighted divergence sum for fixed-point fraction alpha."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    return _exponent_cached(dist, alpha)


# --- correction terms -----------------------------------------------------------


@dataclass(frozen=True)
class Corrections:
    zeta: float
    delta: float
    residual_dropped: bool = True


def zeta_term(ell_x: int, ell_y: int, n_prime: int) -> float:
    if n_prime < 1:
        raise ValueError(f"sequence length must be >= 1, got {n_prime}")
    return (1.5 * ell_x**2 * ell_y + 6.0 * ell_x * ell_y) * math.log2(n_prime + 1) / n_prime


def delta_term(dist: EdgeDistribution, epsilon: float, alpha: float) -> float:
    if epsilon == 0:
        return 0.0
    supp = dist.support_mask
    p = dist.joint[supp]
    mix = alpha * p + (1.0 - alpha) * dist.product()[supp]
    return epsilon * dist.ell * dist.ell * abs(float(np.max(np.log2(p / mix))))


def corrections(ell_x: int, ell_y: int, n_prime: int, epsilon: float, dist: EdgeDistribution, alpha: float) -> Corrections:
    """Finite-length slack; the trailing O(epsilon) residual is taken as 0."""
    return Corrections(zeta_term(ell_x, ell_y, n_prime), delta_term(dist, epsilon, alpha))


def regularity_ratio(dist: EdgeDistribution, n: int) -> float:
    """max over the support of |log(P_X P_Y / P_XY)|^+, divided by log n."""
    supp = dist.support_mask
    ratio = np.log2(dist.product()[supp] / dist.joint[supp])
    return float(max(0.0, ratio.max())) / math.log2(n)


# --- side information per scenario ------------------------------------------------


def side_information(scenario: str, params) -> float:
    """The per-vertex inclusion probability entering the log term.

    seeded -> 1 (no term), equiprobable -> p, randomp -> E(P),
    symmetric -> max(P_UV(1,1), P_U(1) P_V(1)).
    """
    expected = {
        "seeded": SeededParams,
        "equiprobable": EquiprobableParams,
        "randomp": RandomPParams,
        "symmetric": SymmetricParams,
    }
    if scenario not in expected:
        raise InvalidScenarioParams(f"unknown scenario {scenario!r}")
    if not isinstance(params, expected[scenario]):
        raise InvalidScenarioParams(f"{scenario} needs {expected[scenario].__name__}, got {type(params).__name__}")
    if scenario == "seeded":
        return 1.0
    if scenario == "equiprobable":
        return params.p
    if scenario == "randomp":
        return params.family.mean()
    return params.theta


def _neg_log2(q: float) -> float:
    return INF if q <= 0 else -math.log2(q)


def _scaled(weight: float, value: float) -> float:
    # 0 * inf is 0 here: a vanishing weight removes the term
    return 0.0 if weight == 0 else weight * value


# --- condition reports ---------------------------------------------------------------


@dataclass
class ConditionReport:
    scenario: str
    kind: str
    n: int
    alpha_grid: list[float]
    lhs: list[float]
    rhs: list[float]
    satisfied: list[bool]
    overall: bool
    margin: float
    regularity_ratio: float
    regularity_ok: bool
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for k, (l, r, ok) in enumerate(zip(self.lhs, self.rhs, self.satisfied)):
            alpha = self.alpha_grid[k] if self.alpha_grid else None
            out.append(
                {
                    "scenario": self.scenario,
                    "n": self.n,
                    "alpha": alpha,
                    "lhs": l,
                    "rhs": r,
                    "margin": r - l,
                    "satisfied": ok,
                }
            )
        return out

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, np.generic):
                v = v.item()
            if isinstance(v, float) and not math.isfinite(v):
                return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        return json.dumps({k: clean(v) for k, v in asdict(self).items()}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "n", "alpha", "lhs", "rhs", "margin", "satisfied"])
        for row in self.rows():
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row.values()])
        return buf.getvalue()


def default_alpha_n(n: int) -> float:
    return 1.0 - 1.0 / math.sqrt(n)


def check_sufficient(
    scenario: str,
    dist: EdgeDistribution,
    n: int,
    scenario_params,
    alpha_n: float | None = None,
    grid_size: int = 101,
    include_corrections: bool = False,
    epsilon: float | None = None,
) -> ConditionReport:
    """Evaluate the achievability inequality on a uniform alpha grid.

    LHS(alpha) = 2 (1 - alpha) log n / (n - 1).
    RHS(alpha) = E_{alpha^2} + (1 - alpha) * c * (-log q) / n, where q is the
    scenario's inclusion probability and c = 2 (c = 1 for symmetric sets).
    For seeded matching the grid runs over [gamma, max(alpha_n, gamma)] and
    there is no q term.
    """
    if n < 2 or grid_size < 2:
        raise InvalidScenarioParams(f"need n >= 2 and grid_size >= 2, got n={n}, grid_size={grid_size}")
    alpha_n = default_alpha_n(n) if alpha_n is None else float(alpha_n)
    if not 0.0 < alpha_n <= 1.0:
        raise InvalidScenarioParams(f"alpha_n must lie in (0, 1], got {alpha_n}")
    q = side_information(scenario, scenario_params)
    notes = []
    if scenario == "seeded":
        lower = seed_count(n, scenario_params.gamma) / n
        side = 0.0
    else:
        lower = 0.0
        side = (1.0 if scenario == "symmetric" else 2.0) * _neg_log2(q) / n
    if include_corrections:
        eps = default_epsilon(n, dist) if epsilon is None else epsilon
        zeta = zeta_term(dist.ell, dist.ell, n * (n - 1) // 2)
        notes.append("corrections subtracted; O(epsilon) residual of delta set to 0")

    # seeds beyond alpha_n still leave wrong labelings with fixed-point fraction
    # gamma unless gamma = 1, so the range is kept nonempty
    upper = max(alpha_n, lower)
    grid = np.linspace(lower, upper, grid_size).tolist() if lower < upper else [lower]
    lhs, rhs, sat = [], [], []
    for a in grid:
        l = 2.0 * (1.0 - a) * math.log2(n) / (n - 1)
        r = exponent(dist, a * a).value + _scaled(1.0 - a, side)
        if include_corrections:
            r -= zeta + delta_term(dist, eps, a * a)
        lhs.append(l)
        rhs.append(float(r))
        sat.append(bool(l <= r))
    margins = [r - l for l, r in zip(lhs, rhs)]
    ratio = regularity_ratio(dist, n)
    return ConditionReport(
        scenario=scenario,
        kind="sufficient",
        n=n,
        alpha_grid=grid,
        lhs=lhs,
        rhs=rhs,
        satisfied=sat,
        overall=all(sat),
        margin=min(margins) if margins else INF,
        regularity_ratio=ratio,
        regularity_ok=ratio < 1.0,
        notes=notes,
    )


def decay_exponent(q: float, n: int) -> float:
    """a such that q = n^{-a}."""
    return INF if q <= 0 else -math.log(q) / math.log(n)


def check_necessary(scenario: str, dist: EdgeDistribution, n: int, scenario_params) -> ConditionReport:
    """Evaluate the converse inequality at finite n with its o(log n / n) slack dropped."""
    if n < 2:
        raise InvalidScenarioParams(f"need n >= 2, got {n}")
    q = side_information(scenario, scenario_params)
    info = mutual_information(dist)
    log_n = math.log2(n)
    if scenario == "seeded":
        gamma = seed_count(n, scenario_params.gamma) / n
        lhs = 2.0 * (1.0 - gamma) * log_n / n
        rhs = info
    else:
        if scenario in ("equiprobable", "symmetric"):
            a = decay_exponent(q, n)
            if not 0.0 < a < 1.0:
                name = "p_n" if scenario == "equiprobable" else "theta_n"
                raise DecayExponentOutOfRange(f"{name} = n^-{a:.6g}; the exponent must lie in (0, 1)")
        factor = 1.0 if scenario == "symmetric" else 2.0
        lhs = 2.0 * log_n / n
        rhs = info + factor * _neg_log2(q) / n
    ratio = regularity_ratio(dist, n)
    return ConditionReport(
        scenario=scenario,
        kind="necessary",
        n=n,
        alpha_grid=[],
        lhs=[lhs],
        rhs=[rhs],
        satisfied=[lhs <= rhs],
        overall=bool(lhs <= rhs),
        margin=rhs - lhs,
        regularity_ratio=ratio,
        regularity_ok=ratio < 1.0,
        notes=["asymptotic slack dropped"],
    )


def _log2_sum_exp2(xs: list[float]) -> float:
    finite = [x for x in xs if x != -INF]
    if not finite:
        return -INF
    m = max(finite)
    if m == INF:
        return INF
    return m + math.log2(sum(2.0 ** (x - m) for x in finite))


def union_bound_failure_estimate(
    scenario: str,
    dist: EdgeDistribution,
    n: int,
    scenario_params,
    epsilon: float,
    *,
    upper: int | None = None,
    include_corrections: bool = True,
    exact_counts: bool = False,
) -> float:
    """Union bound on P(some labeling with a wrong vertex is typical and consistent).

    Sums, over the number i of correctly labeled vertices from the seed count
    (or 0) to ``upper`` (default n - 1),

        2^{(n - i) log(n q') - N (E_{i(i-1)/(n(n-1))} - zeta_N - delta)},

    with N = n(n-1)/2 and q' = 1, p, E(P) or sqrt(theta) per scenario. With
    ``exact_counts`` the factor n^{n-i} is replaced by C(n, i) * !(n - i).
    The result may exceed 1, in which case the bound is vacuous.
    """
    if n > UNION_BOUND_MAX_N:
        raise TooLarge(f"union bound evaluation capped at n={UNION_BOUND_MAX_N}, got {n}")
    if n < 2:
        raise InvalidScenarioParams(f"need n >= 2, got {n}")
    q = side_information(scenario, scenario_params)
    lower = seed_count(n, scenario_params.gamma) if scenario == "seeded" else 0
    upper = n - 1 if upper is None else int(upper)
    if scenario == "symmetric":
        q = math.sqrt(q)
    big_n = n * (n - 1) // 2
    zeta = zeta_term(dist.ell, dist.ell, big_n) if include_corrections else 0.0
    log_q = -_neg_log2(q)
    exps = []
    for i in range(lower, upper + 1):
        alpha = i * (i - 1) / (n * (n - 1))
        e = exponent(dist, alpha).value
        if include_corrections:
            e -= zeta + delta_term(dist, epsilon, alpha)
        k = n - i
        if exact_counts:
            count = math.comb(n, i) * derangements(k)
            if count == 0:
                continue
            head = math.log2(count) + _scaled(k, log_q)
        else:
            head = _scaled(k, math.log2(n) + log_q)
        exps.append(head - big_n * e)
    total = _log2_sum_exp2(exps)
    if total == -INF:
        return 0.0
    if total > 1023:
        return INF
    return 2.0**total
