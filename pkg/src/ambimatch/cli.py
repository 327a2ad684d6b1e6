"""Command-line entry point.

Exit codes: 0 success / condition satisfied, 1 domain or runtime error,
2 usage or parse error, 3 requested condition violated.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness, theory
from .ambiguity import EquiprobableParams, RandomPParams, SeededParams, SymmetricParams, parse_family
from .errors import AmbimatchError, ConfigParse
from .model import load_distribution
from .typicality import DEFAULT_EPS_CONSTANT, default_epsilon

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VIOLATED = 0, 1, 2, 3
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- exponent ---------------------------------------------------------------------


def cmd_exponent(args) -> int:
    dist = load_distribution(args.dist)
    grid = harness.parse_grid(args.alpha_grid)
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise AmbimatchError(f"alpha grid {args.alpha_grid!r} leaves [0, 1]")
    if args.corrections and args.n is None:
        raise UsageError("--corrections needs --n")
    eps = None
    if args.n is not None:
        eps = args.epsilon if args.epsilon is not None else default_epsilon(args.n, dist)
    rows = []
    header = ["alpha", "E_alpha"] + [f"t_prime_{x}" for x in range(dist.ell)] + ["zeta", "delta"]
    for a in grid:
        res = theory.exponent(dist, a)
        if args.n is not None:
            corr = theory.corrections(dist.ell, dist.ell, args.n * (args.n - 1) // 2, eps, dist, a)
            tail = [corr.zeta, corr.delta]
        else:
            tail = ["NA", "NA"]
        rows.append([a, res.value, *res.minimizer.tolist(), *tail])
    lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
    _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# --- check -------------------------------------------------------------------------


def _scenario_params(args):
    s = args.scenario
    if s == "seeded":
        if args.gamma is None:
            raise UsageError("seeded scenario needs --gamma")
        return SeededParams(args.gamma)
    if s == "equiprobable":
        if (args.p is None) == (args.p_exponent is None):
            raise UsageError("equiprobable scenario needs exactly one of --p, --p-exponent")
        if args.p_exponent is not None:
            if not 0.0 < args.p_exponent < 1.0:
                raise AmbimatchError(f"p_n = n^-a needs 0 < a < 1, got a={args.p_exponent}")
            return EquiprobableParams(args.n ** (-args.p_exponent))
        return EquiprobableParams(args.p)
    if s == "randomp":
        if args.family is None:
            raise UsageError("randomp scenario needs --family")
        return RandomPParams(parse_family(args.family))
    if args.puv11 is None or args.pu1 is None:
        raise UsageError("symmetric scenario needs --puv11 and --pu1")
    return SymmetricParams.from_marginal(args.puv11, args.pu1)


def _report_text(rep: theory.ConditionReport) -> str:
    verdict = "SATISFIED" if rep.overall else "VIOLATED"
    lines = [
        f"{rep.kind} condition, scenario={rep.scenario}, n={rep.n}: {verdict}",
        f"  min margin (rhs - lhs): {rep.margin!r}",
        f"  regularity ratio: {rep.regularity_ratio!r} ({'ok' if rep.regularity_ok else 'flagged'})",
    ]
    if rep.alpha_grid:
        worst = min(range(len(rep.lhs)), key=lambda k: rep.rhs[k] - rep.lhs[k])
        lines.append(f"  tightest alpha: {rep.alpha_grid[worst]!r}")
    lines += [f"  note: {note}" for note in rep.notes]
    return "\n".join(lines)


def cmd_check(args) -> int:
    dist = load_distribution(args.dist)
    params = _scenario_params(args)
    reports = []
    if args.mode in ("sufficient", "both"):
        reports.append(
            theory.check_sufficient(
                args.scenario, dist, args.n, params, alpha_n=args.alpha_n, grid_size=args.grid_size,
                include_corrections=args.corrections, epsilon=args.epsilon,
            )
        )
    if args.mode in ("necessary", "both"):
        reports.append(theory.check_necessary(args.scenario, dist, args.n, params))
    for rep in reports:
        print(_report_text(rep))
        print(rep.to_json())
    if args.csv:
        Path(args.csv).write_text("".join(rep.to_csv() if k == 0 else rep.to_csv().split("\n", 1)[1]
                                          for k, rep in enumerate(reports)))
    return EXIT_OK if all(r.overall for r in reports) else EXIT_VIOLATED


# --- simulate / sweep -----------------------------------------------------------------

_INLINE = {
    "scenario": "scenario",
    "n": "n",
    "dist": "dist",
    "gamma": "gamma",
    "p": "p",
    "family": "family",
    "puv11": "puv11",
    "pu1": "pu1",
    "epsilon": "epsilon",
    "eps_c": "eps_c",
    "trials": "trials",
    "seed": "master_seed",
    "budget": "node_budget",
    "workers": "workers",
    "alpha_n": "alpha_n",
}


def _configs(args) -> list[harness.ExperimentConfig]:
    inline = {key: str(getattr(args, attr)) for attr, key in _INLINE.items() if getattr(args, attr) is not None}
    if args.sweep:
        name, sep, grid = args.sweep.partition("=")
        if not sep:
            raise ConfigParse("--sweep expects PARAM=GRID")
        inline["sweep_param"] = name.strip()
        inline["sweep_values"] = grid.strip()
    if args.config:
        out = []
        for path in args.config:
            path = Path(path)
            try:
                raw = harness.parse_config_text(path.read_text())
            except OSError as exc:
                raise ConfigParse(f"cannot read config {path}: {exc}") from exc
            # command-line flags override file values
            dist_override = "dist" in inline
            raw.update(inline)
            base = None if dist_override else path.parent
            out.append(harness.config_from_mapping(raw, base))
        return out
    inline.setdefault("master_seed", str(DEFAULT_SEED))
    return [harness.config_from_mapping(inline)]


def cmd_simulate(args) -> int:
    configs = _configs(args)
    report = harness.sweep_report(configs, workers=args.workers)
    _write_output(report.csv(), args.out)
    if args.trials_out:
        Path(args.trials_out).write_text(harness.trials_csv(report.aggregates))
    seeds = sorted({c.master_seed for c in configs})
    summary = report.summary()
    print(f"master_seed={','.join(map(str, seeds))} rows={len(report.aggregates)}", file=sys.stderr if not args.out else sys.stdout)
    print(summary, file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


# --- parser --------------------------------------------------------------------------


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=theory.SCENARIOS)
    p.add_argument("--gamma", type=float, help="seed fraction (seeded)")
    p.add_argument("--p", type=float, help="inclusion probability (equiprobable)")
    p.add_argument("--family", help="f_P family: beta:a,b | point:p | tgauss:mu,var (randomp)")
    p.add_argument("--puv11", type=float, help="P_UV(1,1) (symmetric)")
    p.add_argument("--pu1", type=float, help="P_U(1) = P_V(1) (symmetric)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ambimatch", description="Graph matching with ambiguity-set side information.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponent", help="tabulate the exponent E_alpha")
    p.add_argument("--dist", required=True)
    p.add_argument("--alpha-grid", required=True, help="a:b:step, inclusive")
    p.add_argument("--n", type=int, help="vertex count; enables zeta/delta columns")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--corrections", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("check", help="evaluate sufficient and/or necessary conditions")
    _add_scenario_flags(p)
    p.add_argument("--dist", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p-exponent", type=float, help="set p_n = n^-a (equiprobable)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--necessary", dest="mode", action="store_const", const="necessary")
    mode.add_argument("--sufficient", dest="mode", action="store_const", const="sufficient")
    mode.add_argument("--both", dest="mode", action="store_const", const="both")
    p.add_argument("--alpha-n", type=float)
    p.add_argument("--grid-size", type=int, default=101)
    p.add_argument("--corrections", action="store_true")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--csv", help="also write CSV rows here")
    p.set_defaults(func=cmd_check, mode="both")

    for name in ("simulate", "sweep"):
        p = sub.add_parser(name, help="run Monte Carlo trials" if name == "simulate" else "run a parameter sweep")
        p.add_argument("--config", action="append", help="key=value config file (repeatable)")
        _add_scenario_flags(p)
        p.add_argument("--dist")
        p.add_argument("--n", type=int)
        p.add_argument("--epsilon", help="number or 'default'")
        p.add_argument("--eps-c", type=float, help=f"constant c of the default epsilon (default {DEFAULT_EPS_CONSTANT})")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
        p.add_argument("--budget", type=int, help="backtracking node budget per trial")
        p.add_argument("--workers", type=int)
        p.add_argument("--alpha-n", type=float)
        p.add_argument("--sweep", help="PARAM=GRID, e.g. gamma=0:1:0.25")
        p.add_argument("--out", help="aggregate CSV path (default stdout)")
        p.add_argument("--trials-out", help="per-trial CSV path")
        p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader closed early, e.g. `| head`
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except (UsageError, ConfigParse) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AmbimatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
