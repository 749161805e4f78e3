from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from gagliardo import GridFunction, GridSpec
from gagliardo.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, main
from gagliardo.report import config_hash


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# gagliardo ") and "config_sha256=" in lines[0]
    assert lines[1].startswith("# config ")
    return list(csv.DictReader(lines[2:]))


def test_rearrange_three_cells(tmp_path, three_cells):
    src = tmp_path / "u.csv"
    three_cells.to_csv(src)
    assert main(["rearrange", str(src), "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "profile.csv")
    assert [float(r["level"]) for r in rows] == [3.0, 2.0, 1.0]
    assert [float(r["r_outer"]) for r in rows] == [0.5, 1.0, 1.5]
    summary = json.loads((tmp_path / "rearrange.json").read_text())
    assert summary["result"]["levels_match"] and summary["result"]["distribution_match"]


def test_rearrange_rejects_negative_cell(tmp_path, capsys):
    src = tmp_path / "u.csv"
    GridFunction(GridSpec((0.0,), 1.0, (4,)), [0.0, 1.0, 2.0, 0.0]).to_csv(src)
    src.write_text(src.read_text().replace("2.0", "-2.0"))
    assert main(["rearrange", str(src), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "cell (2,)" in capsys.readouterr().err


def test_missing_input_and_bad_config(tmp_path, capsys):
    assert main(["rearrange", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"eps\": [0.1,\n")
    assert main(["counterexample", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "bad.json:" in capsys.readouterr().err
    bad.write_text(json.dumps({"colour": "blue"}))
    assert main(["counterexample", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_constants_prints_alpha(capsys):
    assert main(["constants", "--n", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "alpha_1 = 2\n" in out
    assert main(["constants", "--n", "2", "--sigma", "0.5"]) == EXIT_OK
    assert "alpha_2 = 3.14159265358979" in capsys.readouterr().out


def test_hardy_fifty_rows(tmp_path):
    assert main(["hardy", "--out", str(tmp_path), "--seed", "3"]) == EXIT_OK
    rows = _rows(tmp_path / "hardy.csv")
    assert len(rows) == 50
    assert all(r["ok"] == "true" for r in rows)
    assert all(float(r["F"]) <= float(r["bound"]) * (1 + 1e-6) for r in rows)


def test_theorem2_rejects_small_sp(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"n": 1, "sigma": 0.5, "p": 2.0}}))
    assert main(["theorem2", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
    assert "sigma * p > 1" in capsys.readouterr().err


def test_counterexample_exit_codes(tmp_path):
    out = tmp_path / "a"
    assert main(["counterexample", "--out", str(out), "--expect-reversal"]) == EXIT_OK
    doc = json.loads((out / "counterexample.json").read_text())
    assert 0.025 in doc["result"]["flagged"]
    assert doc["config_sha256"] == config_hash(doc["config"])
    # a single large bump at the boundary shows no reversal
    with pytest.warns(UserWarning, match="slope fit skipped"):
        assert main(["counterexample", "--out", str(out), "--eps", "0.4", "--expect-reversal"]) == EXIT_CHECK
        assert main(["counterexample", "--out", str(out), "--eps", "0.4"]) == EXIT_OK
    # explicit placement that pokes out of the interval
    assert main(["counterexample", "--out", str(out), "--eps", "0.4", "--placement", "0.8"]) == EXIT_CONFIG


def test_counterexample_center_placement_on_ball(tmp_path):
    args = ["counterexample", "--out", str(tmp_path), "--placement", "center", "--grid-h", str(0.025 / 128)]
    assert main(args + ["--expect-reversal"]) == EXIT_OK


def test_outputs_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["counterexample", "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["counterexample", "--out", str(b), "--threads", "3"]) == EXIT_OK
    for name in ("counterexample.csv", "counterexample.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seminorm_command(tmp_path):
    src = tmp_path / "u.csv"
    grid = GridSpec.covering((-0.5,), (0.5,), 1.0 / 64)
    x = grid.centers()[:, 0]
    GridFunction(grid, (1 - 4 * x**2).clip(0) ** 2).to_csv(src)
    assert main(["seminorm", str(src), "--out", str(tmp_path)]) == EXIT_OK
    rows = {r["quantity"]: float(r["value"]) for r in _rows(tmp_path / "seminorm.csv")}
    assert rows["fullspace"] > rows["domain"] > 0


def test_descend_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(
        json.dumps(
            {
                "domain": {"shape": "ball", "center": [0.0, 0.0], "radius": 1.0},
                "params": {"n": 2, "sigma": 0.75, "p": 2.0},
                "grid_h": 0.125,
                "iterations": 5,
            }
        )
    )
    assert main(["descend", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    q = [float(r["quotient"]) for r in _rows(tmp_path / "descent.csv")]
    assert all(b <= a for a, b in zip(q, q[1:]))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gagliardo", "constants", "--n", "3"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "alpha_3 = 4.18879020478639" in res.stdout


@pytest.mark.parametrize("argv", [["--version"], ["constants", "--threads", "0"]])
def test_argparse_errors_exit(argv):
    with pytest.raises(SystemExit):
        main(argv)
