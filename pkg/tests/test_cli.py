import hashlib
import json

import pytest

from ambimatch.cli import build_parser, main
from ambimatch.model import dump_distribution, product_distribution, validate_distribution


@pytest.fixture
def files(tmp_path):
    corr = tmp_path / "corr.txt"
    dump_distribution(validate_distribution([[0.4, 0.1], [0.1, 0.4]]), corr)
    ind = tmp_path / "ind.txt"
    dump_distribution(product_distribution([0.3, 0.7], [0.6, 0.4]), ind)
    return corr, ind


def rows(text):
    lines = text.strip().split("\n")
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


def test_exponent_endpoints(files, capsys):
    corr, _ = files
    assert main(["exponent", "--dist", str(corr), "--alpha-grid", "1:1:1"]) == 0
    (r,) = rows(capsys.readouterr().out)
    assert float(r["E_alpha"]) == 0.0
    assert main(["exponent", "--dist", str(corr), "--alpha-grid", "0:0:1"]) == 0
    (r,) = rows(capsys.readouterr().out)
    assert float(r["E_alpha"]) == pytest.approx(0.27807 / 2, abs=1e-5)
    assert r["zeta"] == "NA"


def test_exponent_product_zero(files, capsys, tmp_path):
    _, ind = files
    out = tmp_path / "e.csv"
    assert main(["exponent", "--dist", str(ind), "--alpha-grid", "0:1:0.1", "--n", "20", "--out", str(out)]) == 0
    rs = rows(out.read_text())
    assert len(rs) == 11
    assert all(abs(float(r["E_alpha"])) <= 1e-9 for r in rs)
    assert float(rs[0]["zeta"]) > 0


def test_exponent_errors(files, capsys):
    corr, _ = files
    assert main(["exponent", "--dist", str(corr), "--alpha-grid", "0:2:1"]) == 1
    assert main(["exponent", "--dist", str(corr), "--alpha-grid", "x"]) == 2
    assert main(["exponent", "--dist", "/nonexistent", "--alpha-grid", "0:1:1"]) == 1
    assert main(["exponent", "--dist", str(corr), "--alpha-grid", "0:1:1", "--corrections"]) == 2


def test_check_exit_codes(files, capsys):
    corr, ind = files
    assert main(["check", "--scenario", "seeded", "--gamma", "1", "--dist", str(corr), "--n", "100", "--necessary"]) == 0
    out = capsys.readouterr().out
    assert "SATISFIED" in out
    block = out[out.index("{"):]
    assert json.loads(block)["overall"] is True
    assert main(["check", "--scenario", "seeded", "--gamma", "0.5", "--dist", str(ind), "--n", "100", "--necessary"]) == 3
    args = ["check", "--scenario", "equiprobable", "--p-exponent", "1.5", "--dist", str(corr), "--n", "100", "--necessary"]
    assert main(args) == 1
    assert main(["check", "--scenario", "seeded", "--dist", str(corr), "--n", "100"]) == 2


def test_check_both_and_csv(files, capsys, tmp_path):
    corr, _ = files
    out = tmp_path / "c.csv"
    code = main(["check", "--scenario", "symmetric", "--puv11", "0.05", "--pu1", "0.2", "--dist", str(corr),
                 "--n", "100", "--both", "--grid-size", "5", "--csv", str(out)])
    assert code in (0, 3)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "scenario,n,alpha,lhs,rhs,margin,satisfied"
    assert len(lines) == 1 + 5 + 1


def test_check_randomp(files, capsys):
    corr, _ = files
    code = main(["check", "--scenario", "randomp", "--family", "beta:1,9", "--dist", str(corr), "--n", "50", "--sufficient"])
    assert code in (0, 3)


def write_cfg(tmp_path, dist, **extra):
    body = {"scenario": "seeded", "n": "8", "dist": str(dist), "gamma": "1", "epsilon": "1", "trials": "1",
            "master_seed": "5"}
    body.update(extra)
    path = tmp_path / "exp.cfg"
    path.write_text("\n".join(f"{k} = {v}" for k, v in body.items()) + "\n")
    return path


def test_simulate_minimal(files, tmp_path, capsys):
    corr, _ = files
    cfg = write_cfg(tmp_path, corr)
    out, trials = tmp_path / "a.csv", tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--trials-out", str(trials)]) == 0
    (t,) = rows(trials.read_text())
    assert t["exact_match"] == "true"
    assert "master_seed=5" in capsys.readouterr().out


def test_simulate_deterministic(files, tmp_path):
    corr, _ = files
    cfg = write_cfg(tmp_path, corr, gamma="0.5", epsilon="0.2", trials="6")
    digests = []
    for k, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{k}.csv"
        trials = tmp_path / f"trials{k}.csv"
        assert main(["simulate", "--config", str(cfg), "--workers", workers, "--out", str(out),
                     "--trials-out", str(trials)]) == 0
        digests.append((hashlib.sha256(out.read_bytes()).hexdigest(), hashlib.sha256(trials.read_bytes()).hexdigest()))
    assert digests[0] == digests[1] == digests[2]


def test_sweep_grid_rows(files, tmp_path):
    corr, _ = files
    out = tmp_path / "s.csv"
    args = ["sweep", "--scenario", "seeded", "--dist", str(corr), "--n", "8", "--trials", "2", "--epsilon", "0.3",
            "--sweep", "gamma=0:1:0.25", "--out", str(out)]
    assert main(args) == 0
    rs = rows(out.read_text())
    assert [float(r["sweep_value"]) for r in rs] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert rs[0]["master_seed"] == "0"


def test_simulate_errors(files, tmp_path):
    corr, _ = files
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario = seeded\nn = 8\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    # a seed count that is not an integer only shows up at run time
    cfg = write_cfg(tmp_path, corr, gamma="0.3")
    assert main(["simulate", "--config", str(cfg)]) == 1


def test_unknown_flag_rejected(files):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--bogus"])
    assert exc.value.code == 2


def test_help_lists_flags():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, sp in sub.items():
        text = sp.format_help()
        for action in sp._actions:
            for opt in action.option_strings:
                assert opt in text, (name, opt)
    assert set(sub) == {"exponent", "check", "simulate", "sweep"}
