import csv
import json
import subprocess
import sys

import pytest

from repeated_sales.cli import main
from repeated_sales.infinite_horizon import equilibrium


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_two_round(capsys):
    code, out, _ = run(capsys, "solve-two-round")
    d = json.loads(out)
    assert code == 0
    assert d["revenue"] == pytest.approx(0.45)
    assert d["manifest"]["subcommand"] == "solve-two-round"
    assert "tool_version" in d["manifest"] and "timestamp" in d["manifest"]


def test_floats_have_twelve_significant_digits(capsys):
    _, out, _ = run(capsys, "solve-two-round")
    p1 = json.loads(out)["p1"]
    assert p1 == float(f"{p1:.12g}")


def test_solve_two_round_with_dist_file(capsys, tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"type": "uniform", "low": 0.5, "high": 1.0}))
    code, out, _ = run(capsys, "solve-two-round", "--dist", str(path))
    d = json.loads(out)
    assert code == 0 and d["p1"] == 0.5 and d["p1_equals_lower_support"]


def test_solve_finite_csv(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "solve-finite", "--n", "4", "--csv", str(path))
    assert code == 0 and json.loads(out)["n"] == 4
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest:")
    rows = list(csv.DictReader(lines[1:]))
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4]
    assert float(rows[1]["R"]) == pytest.approx(0.45)


def test_solve_finite_power_law(capsys):
    code, out, _ = run(capsys, "solve-finite", "--n", "1", "--power-law", "1")
    d = json.loads(out)
    assert d["p"] == pytest.approx(3 ** -0.5, abs=1e-11)


def test_solve_infinite_and_sweep(capsys, tmp_path):
    code, out, _ = run(capsys, "solve-infinite", "--delta", "1")
    d = json.loads(out)
    assert (d["t"], d["p"], d["R"], d["ratio"]) == (0.5, 0.5, 0.25, 1.0)
    path = tmp_path / "s.csv"
    code, _, _ = run(capsys, "solve-infinite", "--sweep", "0.001:1:5", "--log", "--csv", str(path))
    rows = list(csv.DictReader(path.read_text().splitlines()[1:]))
    assert code == 0 and len(rows) == 5
    assert float(rows[-1]["delta"]) == 1.0


def test_sweep_subcommand(capsys, tmp_path):
    path = tmp_path / "n.csv"
    code, _, _ = run(capsys, "sweep", "--parameter", "n", "--range", "1:50:5", "--game", "finite", "--out", str(path))
    rows = list(csv.DictReader(path.read_text().splitlines()[1:]))
    assert code == 0 and all(float(r["R"]) <= float(r["benchmark"]) + 1e-9 for r in rows)
    code, out, _ = run(capsys, "sweep", "--parameter", "n", "--range", "3:5:3", "--game", "existence", "--out", "-")
    assert code == 0 and "false" in out


def test_simulate_quadrature_and_transcript(capsys):
    code, out, _ = run(capsys, "simulate", "--game", "infinite-partial", "--delta", "0.5", "--transcript", "v=0.7")
    d = json.loads(out)
    assert code == 0
    assert d["revenue"] == pytest.approx(equilibrium(0.5).R, abs=1e-9)
    assert d["transcript"][0]["decision"] in ("accept", "reject")
    assert d["config"]["delta"] == 0.5


def test_simulate_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("REPEATED_SALES_SEED", "17")
    _, out1, _ = run(capsys, "simulate", "--game", "two-round", "--method", "mc", "--samples", "2000")
    _, out2, _ = run(capsys, "simulate", "--game", "two-round", "--method", "mc", "--samples", "2000", "--seed", "17")
    assert json.loads(out1)["revenue"] == json.loads(out2)["revenue"]
    monkeypatch.setenv("REPEATED_SALES_SEED", "18")
    _, out3, _ = run(capsys, "simulate", "--game", "two-round", "--method", "mc", "--samples", "2000")
    assert json.loads(out3)["revenue"] != json.loads(out1)["revenue"]


def test_verify_exit_codes(capsys):
    code, out, _ = run(capsys, "verify", "--game", "two-round")
    assert code == 0 and json.loads(out)["all_passed"]
    code, out, _ = run(capsys, "verify", "--game", "two-round", "--perturb", "root-price")
    assert code == 2 and not json.loads(out)["all_passed"]


@pytest.mark.parametrize("argv", [
    ["solve-infinite", "--delta", "1.5"],
    ["simulate", "--game", "infinite-zero", "--delta", "0.6"],
    ["solve-two-round", "--dist", '{"type": "beta"}'],
    ["solve-finite", "--n", "0"],
    ["sweep", "--parameter", "delta", "--range", "bad", "--game", "infinite-partial", "--out", "-"],
])
def test_invalid_config_exit_code(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 3 and err.startswith("error:")


def test_unwritable_path(capsys, tmp_path):
    code, _, err = run(capsys, "solve-finite", "--n", "2", "--csv", str(tmp_path / "missing" / "x.csv"))
    assert code == 1 and "missing" in err


def test_report(capsys):
    code, out, err = run(capsys, "report", "--game", "infinite-zero", "--delta", "0.5")
    assert code == 0 and json.loads(out)["revenue"] == 0.0 and "revenue=0" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "repeated_sales", "solve-infinite", "--delta", "0.5"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["delta"] == 0.5
