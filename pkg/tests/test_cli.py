import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from crowdnav_mpc.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from crowdnav_mpc.config import ConfigError, load_config, parse_config
from crowdnav_mpc.report import (ACCEL_COLUMNS, RUN_COLUMNS, TABLE_COLUMNS, build_report, closed_loop_table,
                                 write_report)

from canned import canned_logs, uniform_cv_log

GOLDEN = Path(__file__).parent / "golden"

SMALL_TRAINING = """
version: 1
training:
  hidden: [8]
  noise_dim: 2
  config: {epochs: 3, batch_size: 32}
  synthetic: {n_scenes: 3, peds_per_scene: 4, max_time: 12.0}
"""


def _write(path, text):
    path.write_text(text)
    return str(path)


def _eth_cv_file(path, n_frames=25, n_peds=3):
    lines = []
    for f in range(n_frames):
        for p in range(n_peds):
            lines.append(f"{f * 10} {p} {-3 + 0.4 * f * (1 + 0.1 * p):.6f} {p + 0.2 * 0.4 * f:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


# ---- config --------------------------------------------------------------

def test_config_defaults_and_overrides(tmp_path):
    cfg = parse_config({"seed": 5, "layout": {"GP1": [-3, 7]}, "planner": {"horizon_n": 10},
                        "predictor": {"model": "m.json"}}, tmp_path)
    assert cfg.seed == 5 and cfg.planner.horizon_n == 10 and np.allclose(cfg.layout["GP1"], [-3, 7])
    assert cfg.predictor.model == str(tmp_path / "m.json")
    assert len(cfg.scenarios) == 10 and all(s.seed == 7 for s in cfg.seeded_scenarios(7))


@pytest.mark.parametrize("doc", [
    {"bogus": 1}, {"version": 2}, {"planner": {"nope": 1}}, {"sim": {"goal_tol": -1}},
    {"scenarios": [{"name": "x"}]}, {"scenarios": [{"name": "x", "robot_goal": "Nowhere"}]},
    {"training": {"extra": 1}},
])
def test_config_rejects(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_config_custom_scenarios(tmp_path):
    p = _write(tmp_path / "c.yaml", """
scenarios:
  - name: walk
    robot_goal: [0, 3]
    pedestrians:
      - {waypoints: [Red1, [0, 4]], speed: 1.0}
""")
    cfg = load_config(p)
    assert [s.name for s in cfg.scenarios] == ["walk"]
    assert cfg.scenarios[0].pedestrians[0].speed == 1.0
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "bad.yaml", "seed: [unclosed"))


# ---- train ---------------------------------------------------------------

def test_train_deterministic_and_zero_epochs(tmp_path):
    cfg = _write(tmp_path / "c.yaml", SMALL_TRAINING)
    a, b, z = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "z.json"
    assert main(["train", "--config", cfg, "--seed", "3", "--out", str(a)]) == EXIT_OK
    assert main(["train", "--config", cfg, "--seed", "3", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads((tmp_path / "a.report.json").read_text())
    assert {"n_params", "val_loss", "best_epoch", "stopped_epoch"} <= set(rep)
    assert main(["train", "--config", cfg, "--seed", "3", "--out", str(z), "--epochs", "0"]) == EXIT_OK
    zrep = json.loads((tmp_path / "z.report.json").read_text())
    assert "zero training" in zrep["note"]
    from crowdnav_mpc.prediction.network import init_model, load_model
    m0 = init_model((8,), 2, 8, 12, m=20, seed=3, dt_obs=0.4)
    mz = load_model(z)
    assert np.array_equal(m0.weights, mz.weights)


def test_train_too_small(tmp_path):
    eth = _eth_cv_file(tmp_path / "tiny.txt", n_frames=21, n_peds=1)
    assert main(["train", "--source", eth, "--out", str(tmp_path / "m.json")]) == EXIT_DATA


# ---- run -----------------------------------------------------------------

def test_run_scene1_both(tmp_path):
    cfg = _write(tmp_path / "c.yaml", SMALL_TRAINING)
    model = tmp_path / "m.json"
    assert main(["train", "--config", cfg, "--out", str(model), "--epochs", "1"]) == EXIT_OK
    runs = _write(tmp_path / "r.yaml", "sim: {goal_tol: 0.1}\nscenarios:\n"
                  "  - {name: scene1, robot_goal: GP1, duration_max: 1.5,"
                  " pedestrians: [{waypoints: [Red1, Red2]}]}\n")
    out = tmp_path / "runs"
    rc = main(["run", "--config", runs, "--scenario", "scene1", "--predictor", "both", "--model", str(model),
               "--out", str(out)])
    assert rc == EXIT_OK
    assert sorted(p.name for p in out.glob("*.jsonl")) == ["scene1__cv.jsonl", "scene1__learned.jsonl"]
    man = json.loads((out / "manifest.json").read_text())
    assert [(r["scenario"], r["predictor"]) for r in man["runs"]] == [("scene1", "learned"), ("scene1", "cv")]


def test_run_errors(tmp_path, capsys):
    assert main(["run", "--scenario", "scene99", "--predictor", "cv", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "scene1" in capsys.readouterr().err
    assert main(["run", "--scenario", "scene1", "--predictor", "learned", "--out", str(tmp_path)]) == EXIT_DATA
    assert main(["run", "--scenario", "scene1", "--predictor", "learned", "--model", str(tmp_path / "none.json"),
                 "--out", str(tmp_path)]) == EXIT_DATA
    with pytest.raises(SystemExit) as exc:
        main(["run", "--predictor", "magic"])
    assert exc.value.code == EXIT_USAGE


# ---- openloop ------------------------------------------------------------

def test_openloop_cv_exact(tmp_path):
    eth = _eth_cv_file(tmp_path / "cv.txt")
    cfg = _write(tmp_path / "c.yaml", "predictor: {sigma_v: 0.0}\n")
    out = tmp_path / "ol.json"
    assert main(["openloop", "--config", cfg, "--data", eth, "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["windows"] == 3 * 6
    assert doc["ade"] < 1e-9 and doc["fde"] < 1e-9


def test_openloop_learned_deterministic(tmp_path, capsys):
    cfg = _write(tmp_path / "c.yaml", SMALL_TRAINING)
    model = tmp_path / "m.json"
    assert main(["train", "--config", cfg, "--out", str(model), "--epochs", "1"]) == EXIT_OK
    eth = _eth_cv_file(tmp_path / "cv.txt")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["openloop", "--data", eth, "--model", str(model), "--seed", "2", "--out", str(a)]) == EXIT_OK
    assert main(["openloop", "--data", eth, "--model", str(model), "--seed", "2", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_openloop_no_windows(tmp_path, capsys):
    eth = _eth_cv_file(tmp_path / "short.txt", n_frames=19)
    assert main(["openloop", "--data", eth]) == EXIT_DATA
    assert "no windows" in capsys.readouterr().err


# ---- report --------------------------------------------------------------

def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _same_cell(a, b):
    try:
        fa, fb = float(a), float(b)
    except ValueError:
        return a == b
    if math.isnan(fa) or math.isnan(fb):
        return math.isnan(fa) and math.isnan(fb)
    return math.isclose(fa, fb, rel_tol=1e-12, abs_tol=1e-15)


@pytest.mark.parametrize("name", ["open_loop.csv", "closed_loop.csv", "runs.csv", "accelerations.csv"])
def test_report_golden(tmp_path, name):
    write_report(build_report(canned_logs()), tmp_path)
    got, want = _read(tmp_path / name), _read(GOLDEN / name)
    assert got[0] == want[0]
    assert len(got) == len(want)
    for g, w in zip(got[1:], want[1:]):
        assert all(_same_cell(x, y) for x, y in zip(g, w)), (g, w)


def test_report_schema_columns(tmp_path):
    write_report(build_report(canned_logs()), tmp_path)
    assert _read(tmp_path / "open_loop.csv")[0] == TABLE_COLUMNS
    assert _read(tmp_path / "closed_loop.csv")[0] == TABLE_COLUMNS
    assert _read(tmp_path / "runs.csv")[0] == RUN_COLUMNS
    assert _read(tmp_path / "accelerations.csv")[0] == ACCEL_COLUMNS
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["format"] == "crowdnav-mpc/report" and doc["version"] == 1
    metrics = [r[1] for r in _read(tmp_path / "open_loop.csv")[1:5]]
    assert metrics == ["ade", "fde", "amd", "amv"]


def test_report_improvement_examples():
    runs = [{"n_peds": 1, "predictor": "learned", "min_distance": 0.3, "min_center_distance": 1.0,
             "time_taken": 24.82, "jerk": 0.5, "mpc_mse": 0.02},
            {"n_peds": 1, "predictor": "cv", "min_distance": 0.2, "min_center_distance": 0.9,
             "time_taken": 19.76, "jerk": 1.0, "mpc_mse": 0.0}]
    rows = {r["metric"]: r for r in closed_loop_table(runs)}
    assert rows["jerk"]["improvement_pct"] == pytest.approx(50.0)
    assert rows["time_taken"]["improvement_pct"] < 0
    assert rows["min_distance"]["improvement_pct"] == pytest.approx(50.0)
    assert math.isnan(rows["mpc_mse"]["improvement_pct"])


def test_report_cli_with_dataset(tmp_path):
    logs = tmp_path / "logs"
    logs.mkdir()
    for lg in canned_logs():
        lg.write(logs / f"{lg.header['scenario']}__{lg.header['predictor']}.jsonl")
    eth = _eth_cv_file(tmp_path / "cv.txt")
    out = tmp_path / "rep"
    assert main(["report", "--logs", str(logs), "--out", str(out), "--eth", eth]) == EXIT_OK
    comp = _read(out / "comparison.csv")
    assert comp[0] == ["method", "predictor", "ade", "fde", "amd", "amv"]
    assert [r[:2] for r in comp[1:]] == [["open-loop-dataset", "cv"], ["closed-loop", "learned"],
                                         ["closed-loop", "cv"]]
    for name in ("open_loop.csv", "closed_loop.csv"):
        got, want = _read(out / name), _read(GOLDEN / name)
        assert len(got) == len(want)
        assert all(_same_cell(x, y) for g, w in zip(got, want) for x, y in zip(g, w))


def test_report_errors(tmp_path):
    assert main(["report", "--logs", str(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_DATA
    (tmp_path / "bad.jsonl").write_text('{"type": "header"}\n')
    assert main(["report", "--logs", str(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_cv_uniform_report_row_is_zero(tmp_path):
    lg = uniform_cv_log(n_cycles=90)
    lg.header.update(scenario="u", predictor="cv")
    row = build_report([lg])["open_loop"][0]
    assert row["metric"] == "ade" and row["cv"] < 1e-12
