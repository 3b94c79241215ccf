import csv
import io
import json

import pytest

from canopy_perc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_constants(capsys):
    code, out, _ = run(capsys, "constants", "--b", "2", "--max-k", "10")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["name", "k_or_h", "b", "value", "lo", "hi"]
    names = {r["name"] for r in table}
    assert names == {"zeta", "xi_inf", "sigma"}
    crit = [r for r in table if r["k_or_h"] == "crit"][0]
    assert float(crit["value"]) == pytest.approx(2.0794415, rel=1e-6)


def test_sweep_grid_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--model", "edge", "--b", "2", "--n", "10",
                       "--lambda", "6.0:8.0:0.1", "--samples", "20")
    assert code == 0
    assert len(rows(out)) == 21


def test_sweep_records_schema(capsys):
    code, out, _ = run(capsys, "sweep", "--n", "4", "--lambda", "1,2", "--samples", "3", "--records")
    assert code == 0
    assert out.splitlines()[0] == "model,b,size,lambda,replicate,seed,cluster_size,edges,connected,isolated,truncated"
    assert len(rows(out)) == 6


def test_chi_is_byte_identical(capsys):
    a = run(capsys, "chi", "--b", "2", "--lambda", "2", "--samples", "300", "--seed", "42")
    b = run(capsys, "chi", "--b", "2", "--lambda", "2", "--samples", "300", "--seed", "42", "--workers", "2")
    assert a[0] == 0 and a[1] == b[1]
    assert len(rows(a[1])) == 1


def test_json_output_and_wall_time(capsys, tmp_path):
    path = tmp_path / "out.json"
    code, out, _ = run(capsys, "yule", "--t", "2", "--samples", "4", "--format", "json", "--output", str(path))
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    assert doc["run"]["master_seed"] == 0 and "wall_time" not in doc["run"]
    assert len(doc["records"]) == 4
    run(capsys, "yule", "--t", "2", "--samples", "2", "--format", "json", "--wall-time", "--output", str(path))
    assert "wall_time" in json.loads(path.read_text())["run"]


def test_env_overrides(capsys, tmp_path, monkeypatch):
    path = tmp_path / "env.csv"
    monkeypatch.setenv("CANOPY_OUTPUT", str(path))
    monkeypatch.setenv("CANOPY_WORKERS", "2")
    code, out, _ = run(capsys, "yule", "--t", "1", "--samples", "3")
    assert code == 0 and out == ""
    assert len(rows(path.read_text())) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--model", "edge", "--t", "3", "--lambda", "1"],
        ["sweep", "--model", "mafia", "--n", "3", "--lambda", "1"],
        ["sweep", "--n", "3", "--t", "2", "--lambda", "1"],
        ["sweep", "--n", "3", "--lambda", "3:1:1"],
        ["chi", "--lambda", "1", "--samples", "0"],
        ["threshold", "--model", "edge", "--n", "5", "--lo", "50", "--hi", "60", "--samples", "20"],
        ["mlimit", "--lambda", "1", "--b", "3"],
        ["nonsense"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert json.loads(err.strip())["error"] == "usage"


def test_refusal_exit_code(capsys):
    code, _, err = run(capsys, "chi", "--lambda", "4", "--samples", "40", "--cap", "5")
    assert code == 3
    assert json.loads(err.strip())["error"] == "refused"


def test_sample_dump(capsys):
    code, out, _ = run(capsys, "sample", "--model", "edge", "--n", "3", "--lambda", "2", "--seed", "1")
    lines = out.splitlines()
    assert lines[0].split() == ["2", "3", "e"]
    assert all(len(line.split()) == 3 for line in lines[1:])
    code, out, _ = run(capsys, "sample", "--model", "edge-inf", "--lambda", "1", "--seed", "1")
    assert code == 0 and out.split()[1] == "inf"


@pytest.mark.parametrize(
    "argv",
    [
        ["threshold", "--model", "edge", "--n", "6", "--samples", "50"],
        ["invariance", "--n", "3", "--lambda", "1", "--samples", "4000"],
        ["mafia", "--t", "2", "--lambda", "1", "--trace"],
        ["mlimit", "--lambda", "1", "--samples", "5"],
        ["percolation", "--measure", "power", "--alpha", "3", "--lambda", "2", "--k", "3:5:1", "--samples", "2"],
        ["degree", "--lambda", "1,4", "--samples", "500"],
        ["certificate", "--model", "mafia", "--t", "3", "--lambda", "6", "--samples", "5"],
    ],
)
def test_subcommands_deterministic_across_workers(capsys, argv):
    a = run(capsys, *argv, "--seed", "5", "--workers", "1")
    b = run(capsys, *argv, "--seed", "5", "--workers", "2")
    assert a[0] == 0, a[2]
    assert a[1] == b[1]
