"""Command-line interface: output contract and exit codes."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from meskf import flat_surface, save_surface
from meskf.cli import main

METRICS_HEADER = ["step", "time_s", "rmse_pos_m", "rmse_head_rad",
                  "anees", "anees_lo", "anees_hi"]
TIMINGS_HEADER = ["trial", "correction_type", "mean_us", "p99_us"]


@pytest.fixture()
def scenario(tmp_path):
    surf = tmp_path / "surf.json"
    save_surface(flat_surface(extent=10.0), surf)
    cfg = {
        "surface": "surf.json",
        "trajectory": {"path": {"type": "circle", "center": [0, 0],
                                "radius": 4.0},
                       "speed": 1.0, "duration": 5.0, "dt": 0.05},
        "sensors": {"anchors": [[8.0, 0.0, 0.0]]},
        "filter": "M-ESEKF",
        "trials": 3,
        "seed": 5,
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return path


def read_rows(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, list(reader)


def test_simulate_outputs_and_headers(scenario, tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(scenario),
                 "--out", str(out)]) == 0
    header, rows = read_rows(out / "metrics.csv")
    assert header == METRICS_HEADER
    assert len(rows) == 101          # K+1 steps for 5 s at 20 Hz
    assert rows[0][0] == "0"
    assert float(rows[0][1]) == 0.0
    theader, trows = read_rows(out / "timings.csv")
    assert theader == TIMINGS_HEADER
    assert {r[1] for r in trows} == {"pose", "range"}
    assert {int(r[0]) for r in trows} == {0, 1, 2}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_trials"] == 3
    assert (out / "trials.npz").exists()


def test_simulate_deterministic(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(scenario), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(scenario), "--out", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == \
        (b / "summary.json").read_bytes()


def test_metrics_recompute_idempotent(scenario, tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", str(scenario), "--out", str(out)])
    before = (out / "metrics.csv").read_bytes()
    redo = tmp_path / "redo"
    assert main(["metrics", "--in", str(out), "--out", str(redo)]) == 0
    assert (redo / "metrics.csv").read_bytes() == before


def test_filter_and_trials_overrides(scenario, tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(scenario), "--filter", "C-ESEKF",
                 "--trials", "2", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_trials"] == 2
    _, trows = read_rows(out / "timings.csv")
    assert "pseudo" in {r[1] for r in trows}


def test_surface_info(scenario, capsys):
    assert main(["surface-info", "--config", str(scenario)]) == 0
    out = capsys.readouterr().out
    assert "domain" in out and "elevation range" in out


def test_exit_code_usage_error():
    assert main(["no-such-command"]) != 0
    assert main([]) != 0


def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"surface\": \"missing.json\"}")
    assert main(["simulate", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 2
    notjson = tmp_path / "notjson.json"
    notjson.write_text("{nope")
    assert main(["simulate", "--config", str(notjson),
                 "--out", str(tmp_path / "o2")]) == 2


def test_exit_code_divergence(tmp_path):
    # dead-reckoning near the chart boundary with a large seeded initial
    # offset walks out of the domain: the trial is flagged diverged
    surf = tmp_path / "surf.json"
    save_surface(flat_surface(extent=5.0), surf)
    cfg = {
        "surface": "surf.json",
        "trajectory": {"path": {"type": "circle", "center": [0, 0],
                                "radius": 4.5},
                       "speed": 1.0, "duration": 20.0, "dt": 0.05},
        "schedule": [{"start": 0.0, "end": 20.0, "sensors": []}],
        "init": {"pos_std": 2.0},
        "trials": 4,
        "seed": 1,
    }
    path = tmp_path / "div.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exclusion_rate"] > 0
