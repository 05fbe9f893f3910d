"""SimLog: the per-cycle record of one closed-loop run, and its JSONL/CSV forms.

JSONL layout, one object per line:
  {"type": "header", "format": ..., "version": 1, ...run settings...}
  {"type": "cycle", "k", "t", "state", "peds", "control", "plan_next", "plan", "predictions"}
  ...
  {"type": "summary", "verdict", "diagnostics", "n_cycles"}

The final cycle record carries no control or plan. Wall-clock solve times are
kept out of the log so that equal runs serialize to equal bytes; they go to a
separate timing file instead.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIMLOG_FORMAT = "crowdnav-mpc/simlog"
SIMLOG_VERSION = 1
CSV_COLUMNS = ["k", "t", "x", "y", "theta", "v", "omega", "plan_status", "min_center_distance"]

VERDICTS = ("goal-reached", "timeout", "collision", "failed")


class SimLogError(ValueError):
    pass


@dataclass(eq=False)
class CycleRecord:
    k: int
    t: float
    state: np.ndarray  # (3,)
    peds: np.ndarray  # (P, 2) true positions
    control: np.ndarray | None = None  # (2,) applied
    plan_next: np.ndarray | None = None  # (3,) planner's one-step-ahead state
    plan: dict | None = None  # cost, violation, iterations, status
    predictions: np.ndarray | None = None  # (P, M, N, 2) at dt_obs, when stored

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()
        return {"type": "cycle", "k": self.k, "t": self.t, "state": arr(self.state), "peds": arr(self.peds),
                "control": arr(self.control), "plan_next": arr(self.plan_next), "plan": self.plan,
                "predictions": arr(self.predictions)}

    @classmethod
    def from_dict(cls, d: dict, n_peds: int) -> "CycleRecord":
        def arr(key, shape=None):
            v = d.get(key)
            if v is None:
                return None
            a = np.asarray(v, dtype=float)
            return a.reshape(shape) if shape is not None else a
        return cls(int(d["k"]), float(d["t"]), arr("state", (3,)), arr("peds", (n_peds, 2)), arr("control", (2,)),
                   arr("plan_next", (3,)), d.get("plan"), arr("predictions"))


@dataclass(eq=False)
class SimLog:
    header: dict
    cycles: list = field(default_factory=list)
    verdict: str = "timeout"
    diagnostics: str = ""
    timing: list = field(default_factory=list)  # (k, predict_s, solve_s); not serialized

    @property
    def dt(self) -> float:
        return float(self.header["dt"])

    @property
    def n_peds(self) -> int:
        return int(self.header["n_peds"])

    @property
    def goal(self) -> np.ndarray:
        return np.asarray(self.header["goal"], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return np.array([c.t for c in self.cycles])

    @property
    def states(self) -> np.ndarray:
        return np.array([c.state for c in self.cycles]).reshape(-1, 3)

    @property
    def ped_positions(self) -> np.ndarray:
        return np.array([c.peds for c in self.cycles]).reshape(len(self.cycles), self.n_peds, 2)

    @property
    def controls(self) -> np.ndarray:
        return np.array([c.control for c in self.cycles if c.control is not None]).reshape(-1, 2)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", "format": SIMLOG_FORMAT, "version": SIMLOG_VERSION, **self.header},
                            sort_keys=True)]
        lines += [json.dumps(c.to_dict(), sort_keys=True) for c in self.cycles]
        lines.append(json.dumps({"type": "summary", "verdict": self.verdict, "diagnostics": self.diagnostics,
                                 "n_cycles": len(self.cycles)}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cycles:
            if c.peds.size:
                dmin = float(np.min(np.linalg.norm(c.peds - c.state[:2], axis=1)))
            else:
                dmin = float("nan")
            v, om = (c.control if c.control is not None else (float("nan"), float("nan")))
            status = c.plan["status"] if c.plan else ""
            w.writerow([c.k, repr(c.t), *(repr(float(x)) for x in c.state), repr(float(v)), repr(float(om)),
                        status, repr(dmin)])
        return buf.getvalue()

    def write(self, path) -> Path:
        """Write ``<path>`` (JSONL) plus sibling ``.csv`` and ``.timing.csv`` files."""
        path = Path(path)
        path.write_text(self.to_jsonl())
        path.with_suffix(".csv").write_text(self.to_csv())
        rows = ["k,predict_s,solve_s"] + [f"{k},{p!r},{s!r}" for k, p, s in self.timing]
        path.with_suffix(".timing.csv").write_text("\n".join(rows) + "\n")
        return path


def parse_simlog(text: str, source: str = "<string>") -> SimLog:
    records = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SimLogError(f"{source}:{i}: not JSON ({exc.msg})") from None
    if not records or records[0].get("type") != "header":
        raise SimLogError(f"{source}: missing header record")
    head = dict(records[0])
    if head.pop("format", None) != SIMLOG_FORMAT or head.pop("version", None) != SIMLOG_VERSION:
        raise SimLogError(f"{source}: not a version-{SIMLOG_VERSION} SimLog")
    head.pop("type")
    for key in ("dt", "n_peds", "goal"):
        if key not in head:
            raise SimLogError(f"{source}: header lacks {key!r}")
    if records[-1].get("type") != "summary":
        raise SimLogError(f"{source}: missing summary record (truncated log?)")
    summary = records[-1]
    try:
        cycles = [CycleRecord.from_dict(r, int(head["n_peds"])) for r in records[1:-1] if r.get("type") == "cycle"]
    except (KeyError, ValueError, TypeError) as exc:
        raise SimLogError(f"{source}: malformed cycle record ({exc})") from None
    if len(cycles) != summary.get("n_cycles") or not cycles:
        raise SimLogError(f"{source}: cycle count does not match summary")
    if summary.get("verdict") not in VERDICTS:
        raise SimLogError(f"{source}: unknown verdict {summary.get('verdict')!r}")
    return SimLog(head, cycles, summary["verdict"], summary.get("diagnostics", ""))


def read_simlog(path) -> SimLog:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SimLogError(f"cannot read {path}: {exc}") from exc
    return parse_simlog(text, str(path))


def simlog_from_arrays(states, peds=None, dt: float = 0.1, controls=None, plan_next=None, goal=(0.0, 0.0),
                       r_r: float = 0.4, r_p: float = 0.3, goal_tol: float = 0.1, verdict: str = "timeout",
                       **header) -> SimLog:
    """Build a SimLog from plain arrays: states (K, 3), peds (K, P, 2), controls and plan_next (K-1, ...)."""
    states = np.asarray(states, dtype=float).reshape(-1, 3)
    kk = states.shape[0]
    peds = np.zeros((kk, 0, 2)) if peds is None else np.asarray(peds, dtype=float).reshape(kk, -1, 2)
    head = {"dt": dt, "n_peds": peds.shape[1], "goal": [float(g) for g in goal], "goal_tol": goal_tol,
            "r_r": r_r, "r_p": r_p, "dt_obs": 0.4, "n_h": 8, "n_pred": 12, **header}
    cycles = []
    for k in range(kk):
        c = CycleRecord(k, k * dt, states[k], peds[k])
        if controls is not None and k < kk - 1:
            c.control = np.asarray(controls[k], dtype=float)
        if plan_next is not None and k < kk - 1:
            c.plan_next = np.asarray(plan_next[k], dtype=float).reshape(-1)
        cycles.append(c)
    return SimLog(head, cycles, verdict)
