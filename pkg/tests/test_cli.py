from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from singflow.cli import SWEEP_HEADER, ExperimentConfig, main
from singflow.errors import ConfigError
from singflow.maps1d import quotient_lorenz_map


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_list_table():
    code, text = run("list")
    assert code == 0
    lines = text.strip().splitlines()
    assert len(lines) - 1 >= 7
    assert any(l.split()[:4] == ["sharp_1", "section_graph", "2", "1"] for l in lines)
    assert any(l.split()[:4] == ["chained_3", "section_graph", "6", "3"] for l in lines)


def test_list_json_and_csv():
    code, text = run("list", "--format", "json")
    d = json.loads(text)
    assert code == 0 and len(d["entries"]) >= 7
    code, text = run("list", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert {r["label"] for r in rows} >= {"sharp_1", "chained_3", "lorenz_classic"}


def test_analyze_sharp_defaults(tmp_path):
    code, text = run("analyze", "--model", "sharp_1", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(text)
    assert rep["s"] == 2 and rep["expectation_met"] and rep["verdict"]["equality"]
    assert rep["seed"] == 20240601
    assert (tmp_path / "sharp_1_census.json").exists() and (tmp_path / "sharp_1_birkhoff.csv").exists()


def test_analyze_synthetic_violation():
    code, text = run("analyze", "--model", "synthetic_violation", "--horizon", "3000", "--burn-in", "300")
    assert code == 1
    assert json.loads(text)["verdict"]["verdict"] == "violation"


def test_analyze_horizon_below_burn_in():
    code, _ = run("analyze", "--model", "sharp_1", "--horizon", "10", "--burn-in", "50")
    assert code == 64


def test_analyze_unreliable():
    code, _ = run("analyze", "--model", "geometric_lorenz", "--horizon", "400", "--burn-in", "40",
                  "--gap-tol", "1e-6", "--grid", "16")
    assert code == 2


def test_unknown_model_and_bad_flag():
    assert run("analyze", "--model", "nosuch")[0] == 64
    with pytest.raises(SystemExit) as ei:
        main(["analyze", "--model", "sharp_1", "--horizon", "abc"], out=io.StringIO())
    assert ei.value.code == 64


def test_sweep_empty():
    code, text = run("sweep")
    assert code == 0
    assert text.strip() == ",".join(SWEEP_HEADER)


def test_sweep_chained():
    code, text = run("sweep", "chained_1", "--model", "chained_2,chained_3", "--horizon", "3000", "--burn-in", "300")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == 0
    assert [int(r["s_measured"]) for r in rows] == [2, 4, 6]
    assert all(r["verdict"] == "ok" for r in rows)


def test_dump_trajectory(tmp_path):
    code, text = run("dump", "--model", "lorenz_classic", "--what", "trajectory", "--horizon", "2", "--out",
                     str(tmp_path))
    assert code == 0
    lines = open(text.strip()).read().splitlines()
    assert lines[0] == "t,x,y,z" and len(lines) > 100


def test_dump_return_map(tmp_path):
    code, text = run("dump", "--model", "geometric_lorenz", "--what", "return_map", "--points", "10000",
                     "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.reader(open(text.strip())))
    assert rows[0] == ["x_in", "x_out"] and len(rows) == 10001
    x = np.array([float(r[0]) for r in rows[1:]])
    y = np.array([float(r[1]) for r in rows[1:]])
    assert np.max(np.abs(y - quotient_lorenz_map(1.9, 0.75)(x))) <= 1e-12


def test_dump_density_lower_piece(tmp_path):
    code, text = run("dump", "--model", "sharp_1", "--what", "density", "--node", "S-", "--bins", "2048",
                     "--out", str(tmp_path))
    assert code == 0
    paths = text.split()
    assert len(paths) == 1
    assert open(paths[0]).readline().strip() == "bin_midpoint,density"


def test_dump_density_needs_section_graph(tmp_path):
    assert run("dump", "--model", "lorenz_classic", "--what", "density", "--out", str(tmp_path))[0] == 64


def test_config_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[experiment]\nhorizon = 3000\nburn_in = 300\nseed = 9\n")
    code, text = run("analyze", "--model", "geometric_lorenz", "--config", str(p))
    rep = json.loads(text)
    assert code == 0 and rep["seed"] == 9 and rep["settings"]["horizon"] == 3000.0


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("x", gap_tol=0.0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("x", horizon=1.0, burn_in=2.0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("x", workers=0).validate()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "singflow", "list", "--format", "json"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["schema"] == 1
