"""Deterministic closed-loop executor: observe, predict, plan, act, log."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..dynamics import ControlInput, RobotState, rk4_step
from ..planner import MpcProblem, ObstacleForecast, build_forecast, solve
from ..prediction.history import DEFAULT_DT_OBS, DEFAULT_N_H, DEFAULT_N_PRED, PedestrianHistory
from ..prediction.resample import resample_to_grid
from ..socialforce import Crowd, SocialForceParams
from .scenarios import LayoutTable, ScenarioSpec, default_layout
from .simlog import CycleRecord, SimLog

log = logging.getLogger(__name__)


@dataclass
class SimConfig:
    dt_obs: float = DEFAULT_DT_OBS
    n_h: int = DEFAULT_N_H
    n_pred: int = DEFAULT_N_PRED
    goal_tol: float = 0.1
    ped_repulsion: bool = True  # pedestrians react to each other and to the robot
    plant_substeps: int = 1  # >1 integrates the plant at dt / substeps (model mismatch)
    deterministic: bool = True  # drop the wall-clock solve budget so runs are bit-reproducible
    prediction_log_every: int = 0  # cycles between stored predictions; 0 means once per dt_obs
    representative: str = "mean"
    inflation_scale: float = 1.0
    # extra clearance (m) planned around every pedestrian; absorbs prediction error
    # between cycles without changing the collision test itself
    safety_margin: float = 0.1

    def __post_init__(self):
        if self.goal_tol <= 0:
            raise ValueError("goal_tol must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be non-negative")
        if self.plant_substeps < 1:
            raise ValueError("plant_substeps must be >= 1")


def step_pedestrians(crowd: Crowd, dt: float, robot=None, repulsion: bool = True,
                     params: SocialForceParams | None = None) -> Crowd:
    """Advance a copy of ``crowd`` by one step; the input is left untouched."""
    out = crowd.copy()
    out.step(dt, robot, (params or SocialForceParams()) if repulsion else None)
    return out


def _obs_stride(dt: float, dt_obs: float) -> int:
    ratio = dt_obs / dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9:
        raise ValueError(f"dt_obs {dt_obs} is not an integer multiple of the control period {dt}")
    return stride


def histories_at(ped_track: list, k: int, stride: int, n_h: int, dt_obs: float) -> list[PedestrianHistory]:
    """Histories from the positions logged at cycles k, k - stride, ... (never later than k)."""
    idx = list(range(k, -1, -stride))[:n_h][::-1]
    pts = np.array([ped_track[i] for i in idx])  # (h, P, 2)
    out = []
    for p in range(pts.shape[1]):
        seq = pts[:, p]
        pad = np.repeat(seq[:1], n_h - len(idx), axis=0)
        out.append(PedestrianHistory(p, np.vstack([pad, seq]), len(idx), dt_obs))
    return out


def plant_step(state: RobotState, control: ControlInput, dt: float, substeps: int = 1) -> RobotState:
    for _ in range(substeps):
        state = rk4_step(state, control, dt / substeps)
    return state


def run_closed_loop(scenario: ScenarioSpec, predictor, problem: MpcProblem | None = None,
                    config: SimConfig | None = None, layout: LayoutTable | None = None) -> SimLog:
    """Run one scenario to goal, collision or ``duration_max``.

    The control period is the planner's ``dt``. Each cycle queries the predictor
    once and solves once, in the order observe, predict, resample, plan, act,
    advance pedestrians, log.
    """
    config = config or SimConfig()
    layout = layout or default_layout()
    start = scenario.start_state(layout)
    goal_xy = scenario.goal_point(layout)
    bearing = math.atan2(goal_xy[1] - start.y, goal_xy[0] - start.x)
    problem = (problem or MpcProblem(RobotState(0.0, 0.0, 0.0))).with_goal(
        RobotState(float(goal_xy[0]), float(goal_xy[1]), bearing))
    if config.deterministic:
        problem = replace(problem, solve_budget=None)
    dt = problem.dt
    stride = _obs_stride(dt, config.dt_obs)
    keep_every = config.prediction_log_every or stride
    routes = scenario.routes(layout)
    crowd = Crowd.from_routes(routes, [p.speed for p in scenario.pedestrians],
                              [p.delay for p in scenario.pedestrians])
    max_cycles = int(math.ceil(scenario.duration_max / dt - 1e-9))

    header = {
        "scenario": scenario.name, "predictor": getattr(predictor, "name", type(predictor).__name__),
        "seed": scenario.seed, "dt": dt, "dt_obs": config.dt_obs, "n_h": config.n_h, "n_pred": config.n_pred,
        "n_peds": len(routes), "goal": [float(goal_xy[0]), float(goal_xy[1])], "goal_tol": config.goal_tol,
        "start": start.as_array().tolist(), "r_r": problem.r_r, "r_p": problem.r_p,
        "planner": {k: v for k, v in asdict(problem).items() if k != "goal"},
        "sim": asdict(config), "routes": [r.tolist() for r in routes],
        "duration_max": scenario.duration_max,
    }
    simlog = SimLog(header)
    state = start
    ped_track = []
    warm = None
    safe = problem.safe_distance
    for k in range(max_cycles + 1):
        t = k * dt
        peds = crowd.positions.copy()
        ped_track.append(peds)
        rec = CycleRecord(k, t, state.as_array(), peds)
        simlog.cycles.append(rec)
        if len(routes) and np.min(np.linalg.norm(peds - state.position, axis=1)) < safe:
            simlog.verdict = "collision"
            break
        if np.linalg.norm(state.position - goal_xy) <= config.goal_tol:
            simlog.verdict = "goal-reached"
            break
        if k == max_cycles:
            simlog.verdict = "timeout"
            break
        try:
            t0 = time.perf_counter()
            preds = []
            if len(routes):
                hists = histories_at(ped_track, k, stride, config.n_h, config.dt_obs)
                preds = predictor.predict(hists, config.n_pred, k)
            grids = [resample_to_grid(p, dt, problem.horizon_n, origin=peds[i]) for i, p in enumerate(preds)]
            forecast = build_forecast(grids, peds, problem, config.representative, config.inflation_scale)
            if config.safety_margin:
                forecast = ObstacleForecast(forecast.positions, forecast.inflation + config.safety_margin)
            t1 = time.perf_counter()
            sol = solve(problem, state, forecast, warm)
            t2 = time.perf_counter()
            control = sol.first_control
            nxt = plant_step(state, control, dt, config.plant_substeps)
        except Exception as exc:  # surfaced as a failed-run verdict
            log.exception("cycle %d of %s failed", k, scenario.name)
            simlog.verdict = "failed"
            simlog.diagnostics = f"cycle {k}: {type(exc).__name__}: {exc}"
            break
        simlog.timing.append((k, t1 - t0, t2 - t1))
        rec.control = control.as_array()
        rec.plan_next = sol.predicted_states[1].copy()
        rec.plan = {"cost": sol.cost, "violation": sol.max_constraint_violation, "iterations": sol.iterations,
                    "status": sol.status.value}
        if preds and k % keep_every == 0:
            rec.predictions = np.stack([p.samples for p in preds])
        crowd.step(dt, state.position, SocialForceParams() if config.ped_repulsion else None)
        state = nxt
        warm = sol
    return simlog
