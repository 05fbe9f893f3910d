"""Report tables from a set of SimLogs.

Files written by ``write_report`` (column order is part of the schema):

- ``open_loop.csv``   n_peds, metric, si, cv, improvement_pct        (ade, fde, amd, amv)
- ``closed_loop.csv`` n_peds, metric, si, cv, improvement_pct        (min_distance, min_center_distance,
  time_taken, jerk, mpc_mse)
- ``comparison.csv``  method, predictor, ade, fde, amd, amv           (only with a dataset evaluation)
- ``runs.csv``        one row of closed-loop scores per run
- ``accelerations.csv`` scenario, predictor, t, linear_acc, angular_acc
- ``report.json``     all of the above tables under one versioned document

"si" is the learned predictor. Improvement is relative to CV and positive when
the learned predictor is better (larger distances, smaller everything else).
Numbers are written at full precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .metrics.closedloop import accelerations, closed_loop_scores, open_loop_records
from .metrics.openloop import improvement

REPORT_FORMAT = "crowdnav-mpc/report"
REPORT_VERSION = 1
OPEN_LOOP_METRICS = ("ade", "fde", "amd", "amv")
CLOSED_LOOP_METRICS = ("min_distance", "min_center_distance", "time_taken", "jerk", "mpc_mse")
HIGHER_IS_BETTER = {"min_distance", "min_center_distance"}
TABLE_COLUMNS = ["n_peds", "metric", "si", "cv", "improvement_pct"]
COMPARISON_COLUMNS = ["method", "predictor", "ade", "fde", "amd", "amv"]
RUN_COLUMNS = ["scenario", "predictor", "n_peds", "verdict", "min_distance", "min_center_distance", "collision",
               "time_taken", "jerk", "mpc_mse"]
ACCEL_COLUMNS = ["scenario", "predictor", "t", "linear_acc", "angular_acc"]
SI, CV = "learned", "cv"


def _mean(values) -> float:
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(np.mean(vals)) if vals else float("nan")


def _improv(si: float, cv: float, metric: str) -> float:
    if math.isnan(si) or math.isnan(cv) or cv == 0:
        return float("nan")
    return improvement(si, cv, metric in HIGHER_IS_BETTER)


def run_rows(logs) -> list[dict]:
    rows = []
    for lg in logs:
        s = closed_loop_scores(lg)
        rows.append({"scenario": lg.header["scenario"], "predictor": lg.header["predictor"], "n_peds": lg.n_peds,
                     "verdict": lg.verdict, "min_distance": s.min_distance,
                     "min_center_distance": s.min_center_distance, "collision": s.collision,
                     "time_taken": s.time_taken, "jerk": s.jerk, "mpc_mse": s.mpc_mse})
    return rows


def open_loop_table(logs) -> list[dict]:
    # (predictor, n_peds) -> metric -> list of per (cycle, pedestrian) values
    pool = defaultdict(lambda: defaultdict(list))
    for lg in logs:
        for _, _, sc in open_loop_records(lg):
            for m in OPEN_LOOP_METRICS:
                pool[(lg.header["predictor"], lg.n_peds)][m].append(getattr(sc, m))
    buckets = sorted({lg.n_peds for lg in logs})
    rows = []
    for b in buckets:
        for m in OPEN_LOOP_METRICS:
            si, cv = _mean(pool[(SI, b)][m]), _mean(pool[(CV, b)][m])
            rows.append({"n_peds": b, "metric": m, "si": si, "cv": cv, "improvement_pct": _improv(si, cv, m)})
    return rows


def closed_loop_table(runs: list[dict]) -> list[dict]:
    rows = []
    for b in sorted({r["n_peds"] for r in runs}):
        for m in CLOSED_LOOP_METRICS:
            si = _mean(r[m] for r in runs if r["n_peds"] == b and r["predictor"] == SI)
            cv = _mean(r[m] for r in runs if r["n_peds"] == b and r["predictor"] == CV)
            rows.append({"n_peds": b, "metric": m, "si": si, "cv": cv, "improvement_pct": _improv(si, cv, m)})
    return rows


def comparison_table(logs, dataset_scores: dict | None) -> list[dict]:
    """Dataset (open-loop) scores next to closed-loop scores pooled over all runs."""
    if not dataset_scores:
        return []
    rows = []
    for pred, sc in sorted(dataset_scores.items()):
        rows.append({"method": "open-loop-dataset", "predictor": pred, **{m: getattr(sc, m) for m in OPEN_LOOP_METRICS}})
    for pred in (SI, CV):
        recs = [s for lg in logs if lg.header["predictor"] == pred for _, _, s in open_loop_records(lg)]
        if recs:
            rows.append({"method": "closed-loop", "predictor": pred,
                         **{m: _mean(getattr(s, m) for s in recs) for m in OPEN_LOOP_METRICS}})
    return rows


def acceleration_rows(logs) -> list[dict]:
    rows = []
    for lg in logs:
        if lg.controls.shape[0] < 3:
            continue
        lin, ang = accelerations(lg)
        t = lg.times[: lin.size]
        for ti, a, w in zip(t, lin, ang):
            rows.append({"scenario": lg.header["scenario"], "predictor": lg.header["predictor"], "t": float(ti),
                         "linear_acc": float(a), "angular_acc": float(w)})
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def build_report(logs, dataset_scores: dict | None = None) -> dict:
    if not logs:
        raise ValueError("no logs to report on")
    logs = sorted(logs, key=lambda lg: (lg.header["scenario"], lg.header["predictor"]))
    runs = run_rows(logs)
    return {"open_loop": open_loop_table(logs), "closed_loop": closed_loop_table(runs),
            "comparison": comparison_table(logs, dataset_scores), "runs": runs,
            "accelerations": acceleration_rows(logs)}


def write_report(report: dict, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"open_loop.csv": ("open_loop", TABLE_COLUMNS), "closed_loop.csv": ("closed_loop", TABLE_COLUMNS),
             "runs.csv": ("runs", RUN_COLUMNS), "accelerations.csv": ("accelerations", ACCEL_COLUMNS)}
    if report["comparison"]:
        files["comparison.csv"] = ("comparison", COMPARISON_COLUMNS)
    written = []
    for name, (key, cols) in files.items():
        p = out / name
        p.write_text(to_csv(report[key], cols))
        written.append(p)
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION,
           **{k: [{c: _json_safe(v) for c, v in r.items()} for r in rows] for k, rows in report.items()
              if k != "accelerations"}}
    p = out / "report.json"
    p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    written.append(p)
    return written


def format_table(rows: list[dict], digits: int = 3) -> str:
    """Rounded plain-text view of a bucket table for the terminal."""
    lines = [f"{'peds':>4}  {'metric':<20}{'SI':>10}{'CV':>10}{'improv %':>10}"]
    for r in rows:
        lines.append(f"{r['n_peds']:>4}  {r['metric']:<20}{r['si']:>10.{digits}f}{r['cv']:>10.{digits}f}"
                     f"{r['improvement_pct']:>10.2f}")
    return "\n".join(lines)
