"""Closed-loop navigation scores computed from a SimLog, plus open-loop replay."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .openloop import OpenLoopScores, open_loop_scores


@dataclass
class MinDistance:
    surface: float  # center distance minus (r_r + r_p); negative when discs overlap
    center: float
    collision: bool
    per_ped: np.ndarray  # (P,) surface distance per pedestrian
    k: int  # cycle index of the closest approach


@dataclass
class ClosedLoopScores:
    min_distance: float
    time_taken: float | None  # None when the goal was not reached
    jerk: float
    mpc_mse: float
    min_center_distance: float = float("nan")
    collision: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def min_distance(log, radii: tuple | None = None) -> MinDistance:
    if not log.cycles:
        raise ValueError("empty log")
    if log.n_peds < 1:
        raise ValueError("log has no pedestrians")
    r_r, r_p = radii if radii is not None else (log.header["r_r"], log.header["r_p"])
    d = np.linalg.norm(log.ped_positions - log.states[:, None, :2], axis=2)  # (K, P)
    k, _ = np.unravel_index(np.argmin(d), d.shape)
    center = float(d.min())
    safe = r_r + r_p
    return MinDistance(center - safe, center, center < safe, d.min(axis=0) - safe, int(k))


def time_to_goal(log, goal=None, tol: float | None = None) -> float | None:
    """First logged time with the robot within ``tol`` of ``goal``; None if never."""
    goal = log.goal if goal is None else np.asarray(goal, dtype=float)
    tol = log.header.get("goal_tol", 0.1) if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = np.linalg.norm(log.states[:, :2] - goal, axis=1)
    hit = np.nonzero(d <= tol)[0]
    return float(log.times[hit[0]]) if hit.size else None


def derivative(series, dt: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    return np.gradient(np.asarray(series, dtype=float), dt, edge_order=2)


def jerk_from_speed(v, dt: float) -> float:
    v = np.asarray(v, dtype=float)
    if v.size < 4:
        raise ValueError("jerk needs at least 4 speed samples")
    return float(np.abs(derivative(derivative(v, dt), dt)).mean())


def jerk(log) -> float:
    """Mean absolute jerk of the commanded linear speed."""
    return jerk_from_speed(log.controls[:, 0], log.dt)


def accelerations(log) -> tuple[np.ndarray, np.ndarray]:
    """Linear and angular acceleration series of the applied controls."""
    u = log.controls
    if u.shape[0] < 3:
        raise ValueError("need at least 3 controls")
    return derivative(u[:, 0], log.dt), derivative(u[:, 1], log.dt)


def mpc_mse(log) -> float:
    """Mean squared gap between each plan's one-step-ahead position and where the robot ended up."""
    errs = []
    for cur, nxt in zip(log.cycles[:-1], log.cycles[1:]):
        if cur.plan_next is None:
            continue
        errs.append(float(np.sum((cur.plan_next[:2] - nxt.state[:2]) ** 2)))
    if not errs:
        raise ValueError("log has no plan records")
    return float(np.mean(errs))


def closed_loop_scores(log) -> ClosedLoopScores:
    if log.n_peds:
        md = min_distance(log)
        surf, center, hit = md.surface, md.center, md.collision
    else:
        surf = center = float("inf")
        hit = False
    # short or hand-built logs may lack enough controls or any plan; report those as NaN
    jk = jerk(log) if log.controls.shape[0] >= 4 else float("nan")
    has_plan = any(c.plan_next is not None for c in log.cycles[:-1])
    return ClosedLoopScores(surf, time_to_goal(log), jk, mpc_mse(log) if has_plan else float("nan"), center, hit)


def eligible_cycles(log) -> list[int]:
    """Stored-prediction cycles with a full history and N future truths in the log."""
    stride = int(round(log.header["dt_obs"] / log.dt))
    n_h, n = int(log.header["n_h"]), int(log.header["n_pred"])
    last = len(log.cycles) - 1
    return [c.k for c in log.cycles
            if c.predictions is not None and c.k >= stride * (n_h - 1) and c.k + stride * n <= last]


def open_loop_records(log) -> list[tuple[int, int, OpenLoopScores]]:
    """(cycle, pedestrian, scores) for every eligible stored prediction."""
    stride = int(round(log.header["dt_obs"] / log.dt))
    n = int(log.header["n_pred"])
    peds = log.ped_positions
    out = []
    for k in eligible_cycles(log):
        preds = log.cycles[k].predictions
        truth = peds[k + stride: k + stride * n + 1: stride]  # (N, P, 2)
        for p in range(preds.shape[0]):
            out.append((k, p, open_loop_scores(preds[p], truth[:, p])))
    return out


def _mean_scores(rows: list[OpenLoopScores]) -> OpenLoopScores:
    a = np.array([[r.ade, r.fde, r.amd, r.amv] for r in rows])
    return OpenLoopScores(*(float(x) for x in a.mean(axis=0)))


def aggregate_open_loop(logs) -> dict[int, OpenLoopScores]:
    """Average open-loop scores over all eligible (cycle, pedestrian) pairs, bucketed by pedestrian count."""
    buckets = defaultdict(list)
    for lg in logs:
        buckets[lg.n_peds].extend(s for _, _, s in open_loop_records(lg))
    buckets = {b: rows for b, rows in buckets.items() if rows}
    if not buckets:
        raise ValueError("no eligible cycles")
    return {b: _mean_scores(buckets[b]) for b in sorted(buckets)}
