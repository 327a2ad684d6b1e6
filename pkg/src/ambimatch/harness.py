"""Monte Carlo driver: sample, generate side information, match, aggregate.

Trial t of every sweep point draws from ``RngStream(master_seed, t)``, so
records depend only on (master_seed, t, config) and not on the worker count
or execution order. Adjacent sweep points therefore share random numbers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import theory
from .ambiguity import (
    EquiprobableParams,
    RandomPParams,
    SeededParams,
    SymmetricParams,
    generate,
    parse_family,
)
from .errors import AmbimatchError, BudgetExhaustedEverywhere, ConfigParse
from .graphgen import RngStream, sample_pair
from .matcher import DEFAULT_CANDIDATE_CAP, DEFAULT_NODE_BUDGET, tm_match
from .model import EdgeDistribution, load_distribution
from .typicality import DEFAULT_EPS_CONSTANT, TypicalityParams, default_epsilon

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = [
    "sweep_param",
    "sweep_value",
    "n",
    "trials",
    "mean_accuracy",
    "accuracy_ci_lo",
    "accuracy_ci_hi",
    "exact_match_rate",
    "failure_rate",
    "truncation_rate",
    "mean_candidates",
    "sufficient_satisfied",
    "necessary_satisfied",
    "union_bound_estimate",
    "epsilon",
    "master_seed",
]
TRIAL_COLUMNS = [
    "sweep_param",
    "sweep_value",
    "trial",
    "n",
    "candidate_count",
    "accuracy",
    "exact_match",
    "failure",
    "truncated",
    "nodes_explored",
]
SWEEPABLE = ("gamma", "p", "n", "epsilon", "puv11", "pu1", "family", "eps_c")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    n: int
    dist: EdgeDistribution
    gamma: float | None = None
    p: float | None = None
    family: str | None = None
    puv11: float | None = None
    pu1: float | None = None
    epsilon: float | str = "default"
    eps_c: float = DEFAULT_EPS_CONSTANT
    trials: int = 100
    master_seed: int = 0
    node_budget: int = DEFAULT_NODE_BUDGET
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    workers: int = 1
    sweep_param: str | None = None
    sweep_values: tuple = ()
    alpha_n: float | None = None
    grid_size: int = 101
    dist_path: str | None = None

    def __post_init__(self):
        if self.scenario not in theory.SCENARIOS:
            raise ConfigParse(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ConfigParse("trials must be >= 1")
        if self.n < 2:
            raise ConfigParse("n must be >= 2")
        if self.sweep_param is not None and self.sweep_param not in SWEEPABLE:
            raise ConfigParse(f"cannot sweep {self.sweep_param!r}; choose from {', '.join(SWEEPABLE)}")
        if self.sweep_param is None and self.sweep_values:
            raise ConfigParse("sweep_values given without sweep_param")

    def scenario_params(self):
        try:
            if self.scenario == "seeded":
                return SeededParams(_need(self.gamma, "gamma"))
            if self.scenario == "equiprobable":
                return EquiprobableParams(_need(self.p, "p"))
            if self.scenario == "randomp":
                return RandomPParams(parse_family(_need(self.family, "family")))
            return SymmetricParams.from_marginal(_need(self.puv11, "puv11"), _need(self.pu1, "pu1"))
        except AmbimatchError as exc:
            if isinstance(exc, ConfigParse):
                raise
            raise ConfigParse(str(exc)) from exc

    def resolved_epsilon(self) -> float:
        if self.epsilon == "default":
            return default_epsilon(self.n, c=self.eps_c)
        return float(self.epsilon)

    def points(self) -> list[tuple[object, ExperimentConfig]]:
        """(sweep value, single-point config) for every sweep value."""
        if self.sweep_param is None:
            return [(None, self)]
        out = []
        for v in self.sweep_values:
            value = int(v) if self.sweep_param == "n" else v
            out.append((value, replace(self, sweep_param=None, sweep_values=(), **{self.sweep_param: value})))
        return out


def _need(value, name):
    if value is None:
        raise ConfigParse(f"missing required parameter {name!r}")
    return value


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    candidate_count: int
    accuracy: float | None
    exact_match: bool
    failure: bool
    truncated: bool
    nodes_explored: int
    wall_time: float = field(compare=False, default=0.0)


def run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    start = time.perf_counter()
    stream = RngStream(config.master_seed, trial)
    pair = sample_pair(config.n, config.dist, "uniform-random", stream.child(0))
    B = generate(config.scenario, config.n, pair.truth, config.scenario_params(), stream.child(1))
    res = tm_match(
        pair,
        B,
        TypicalityParams(config.resolved_epsilon()),
        stream.child(2),
        budget=config.node_budget,
        cap=config.candidate_cap,
    )
    return TrialRecord(
        trial=trial,
        candidate_count=res.candidate_count,
        accuracy=res.accuracy,
        exact_match=res.exact_match,
        failure=res.failed,
        truncated=res.truncated,
        nodes_explored=res.candidates.nodes_explored,
        wall_time=time.perf_counter() - start,
    )


def _run_one(args):
    return run_trial(*args)


def run_trials(config: ExperimentConfig, workers: int | None = None) -> list[TrialRecord]:
    workers = config.workers if workers is None else workers
    jobs = [(config, t) for t in range(config.trials)]
    if workers <= 1:
        records = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return sorted(records, key=lambda r: r.trial)


def wilson_interval(successes: float, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval; ``successes`` may be fractional (sum of accuracies)."""
    if trials == 0:
        return math.nan, math.nan
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class Aggregate:
    sweep_param: str | None
    sweep_value: object
    n: int
    trials: int
    mean_accuracy: float
    accuracy_ci_lo: float
    accuracy_ci_hi: float
    exact_match_rate: float
    failure_rate: float
    truncation_rate: float
    mean_candidates: float
    sufficient_satisfied: bool | None
    necessary_satisfied: bool | None
    union_bound_estimate: float | None
    epsilon: float
    master_seed: int
    records: list[TrialRecord] = field(repr=False, default_factory=list)

    @property
    def unusable(self) -> bool:
        return self.truncation_rate == 1.0


def theory_columns(config: ExperimentConfig, epsilon: float):
    """Verdicts from the theory module for one sweep point; None where undefined."""
    params = config.scenario_params()
    suff = theory.check_sufficient(
        config.scenario, config.dist, config.n, params, alpha_n=config.alpha_n, grid_size=config.grid_size
    ).overall
    try:
        nec = theory.check_necessary(config.scenario, config.dist, config.n, params).overall
    except AmbimatchError:
        nec = None
    try:
        ub = theory.union_bound_failure_estimate(config.scenario, config.dist, config.n, params, epsilon)
    except AmbimatchError:
        ub = None
    return suff, nec, ub


def aggregate(config: ExperimentConfig, records: list[TrialRecord], sweep_param=None, sweep_value=None) -> Aggregate:
    usable = [r for r in records if not r.truncated]
    matched = [r for r in usable if not r.failure]
    accs = [r.accuracy for r in matched]
    mean_acc = math.fsum(accs) / len(accs) if accs else math.nan
    lo, hi = wilson_interval(math.fsum(accs), len(accs))
    eps = config.resolved_epsilon()
    suff, nec, ub = theory_columns(config, eps)
    agg = Aggregate(
        sweep_param=sweep_param,
        sweep_value=sweep_value,
        n=config.n,
        trials=len(records),
        mean_accuracy=mean_acc,
        accuracy_ci_lo=lo,
        accuracy_ci_hi=hi,
        exact_match_rate=(sum(r.exact_match for r in usable) / len(usable)) if usable else math.nan,
        failure_rate=(sum(r.failure for r in usable) / len(usable)) if usable else math.nan,
        truncation_rate=sum(r.truncated for r in records) / len(records),
        mean_candidates=(math.fsum(r.candidate_count for r in usable) / len(usable)) if usable else math.nan,
        sufficient_satisfied=suff,
        necessary_satisfied=nec,
        union_bound_estimate=ub,
        epsilon=eps,
        master_seed=config.master_seed,
        records=records,
    )
    if agg.unusable:
        log.warning("every trial hit the node budget at %s=%s; aggregate unusable", sweep_param, sweep_value)
    return agg


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> list[Aggregate]:
    """One aggregate per sweep point (a single one when there is no sweep)."""
    out = []
    for value, point in config.points():
        records = run_trials(point, workers)
        out.append(aggregate(point, records, config.sweep_param, value))
    if all(a.unusable for a in out):
        raise BudgetExhaustedEverywhere("every trial of every sweep point exhausted the node budget")
    return out


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregates_csv(aggs: list[Aggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for a in aggs:
        w.writerow([_fmt(getattr(a, c)) for c in AGGREGATE_COLUMNS])
    return buf.getvalue()


def trials_csv(aggs: list[Aggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for a in aggs:
        for r in a.records:
            w.writerow(
                [_fmt(v) for v in (a.sweep_param, a.sweep_value, r.trial, a.n, r.candidate_count, r.accuracy,
                                   r.exact_match, r.failure, r.truncated, r.nodes_explored)]
            )
    return buf.getvalue()


def trend_sign(aggs: list[Aggregate]) -> float:
    """Sign of the Spearman correlation of mean accuracy against the sweep value."""
    pts = [(float(a.sweep_value), a.mean_accuracy) for a in aggs
           if a.sweep_value is not None and not math.isnan(a.mean_accuracy)]
    if len(pts) < 2:
        return math.nan
    x, y = zip(*pts)
    if len(set(x)) < 2 or len(set(y)) < 2:
        return 0.0
    rho = stats.spearmanr(x, y).statistic
    return float(np.sign(rho))


@dataclass
class SweepReport:
    aggregates: list[Aggregate]
    trends: list[float]

    def csv(self) -> str:
        return aggregates_csv(self.aggregates)

    def summary(self) -> str:
        lines = []
        for k, a in enumerate(self.aggregates):
            lines.append(
                f"[{k}] {a.sweep_param or '-'}={_fmt(a.sweep_value)} n={a.n} trials={a.trials} "
                f"acc={a.mean_accuracy:.4f} [{a.accuracy_ci_lo:.4f}, {a.accuracy_ci_hi:.4f}] "
                f"exact={a.exact_match_rate:.4f} fail={a.failure_rate:.4f} trunc={a.truncation_rate:.4f}"
            )
        lines.append("trend signs (Spearman, accuracy vs sweep value): " + ", ".join(_fmt(t) for t in self.trends))
        return "\n".join(lines)


def sweep_report(configs: list[ExperimentConfig], workers: int | None = None) -> SweepReport:
    aggs, trends = [], []
    for cfg in configs:
        part = run_experiment(cfg, workers)
        aggs.extend(part)
        trends.append(trend_sign(part))
    return SweepReport(aggs, trends)


# --- configuration parsing ----------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ConfigParse(f"bad grid {text!r}: need step > 0 and end >= start")
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + k * step, 12) for k in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigParse(f"bad grid {text!r}") from exc


_FLOAT_KEYS = {"gamma", "p", "puv11", "pu1", "eps_c", "alpha_n"}
_INT_KEYS = {"n", "trials", "master_seed", "node_budget", "candidate_cap", "workers", "grid_size"}
_STR_KEYS = {"scenario", "family", "sweep_param"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | {"dist", "epsilon", "sweep_values"}


def config_from_mapping(raw: dict[str, str], base_dir: Path | None = None) -> ExperimentConfig:
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigParse(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw: dict = {}
    try:
        for k, v in raw.items():
            if k in _FLOAT_KEYS:
                kw[k] = float(v)
            elif k in _INT_KEYS:
                kw[k] = int(v)
            elif k in _STR_KEYS:
                kw[k] = v
        eps = raw.get("epsilon", "default")
        kw["epsilon"] = eps if eps == "default" else float(eps)
    except ValueError as exc:
        raise ConfigParse(str(exc)) from exc
    if "dist" not in raw:
        raise ConfigParse("missing required key 'dist'")
    path = Path(raw["dist"])
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    try:
        kw["dist"] = load_distribution(path)
    except (OSError, AmbimatchError) as exc:
        raise ConfigParse(f"cannot read distribution {path}: {exc}") from exc
    kw["dist_path"] = str(path)
    for key in ("scenario", "n"):
        if key not in kw:
            raise ConfigParse(f"missing required key {key!r}")
    if "sweep_values" in raw:
        if kw.get("sweep_param") == "family":
            kw["sweep_values"] = tuple(s.strip() for s in raw["sweep_values"].split(";") if s.strip())
        else:
            kw["sweep_values"] = tuple(parse_grid(raw["sweep_values"]))
    return ExperimentConfig(**kw)


def parse_config_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParse(f"line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        raw[k] = v
    return raw


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(parse_config_text(text), path.parent)
