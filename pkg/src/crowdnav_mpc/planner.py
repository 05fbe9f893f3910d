"""Receding-horizon planner over unicycle control sequences.

Single shooting: the horizon's controls are the only decision variables and
states come from the RK4 rollout, so every plan is dynamically feasible. The
objective is a sum of squared residuals (goal tracking, control effort, and a
quadratic penalty on safety-disc intrusion), minimized by projected
Gauss-Newton with an Armijo backtracking line search.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dynamics import ControlInput, RobotState, RobotTrajectory, rollout_array, wrap_angle
from .metrics.openloop import max_eigenvalues, step_covariances
from .prediction.history import PredictionSet


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration-limit"
    BUDGET_EXCEEDED = "budget-exceeded"
    INFEASIBLE_FALLBACK = "infeasible-fallback"


@dataclass(frozen=True)
class MpcProblem:
    goal: RobotState
    horizon_n: int = 20
    dt: float = 0.1
    q: tuple = (1.0, 1.0, 0.1)
    r: tuple = (0.1, 0.05)
    q_t: tuple | None = None  # defaults to 10 * q
    v_bounds: tuple = (-1.0, 1.0)
    omega_bounds: tuple = (-1.0, 1.0)
    r_r: float = 0.4
    r_p: float = 0.3
    slack_weight: float = 1e5
    max_iters: int = 40
    solve_budget: float | None = 0.09
    tol: float = 1e-6
    brake_decel: float = 2.0  # m/s^2 for the fallback
    multi_start: bool = True
    screen_iters: int = 4

    def __post_init__(self):
        if self.q_t is None:
            object.__setattr__(self, "q_t", tuple(10.0 * w for w in self.q))
        if min(self.q) < 0 or min(self.r) < 0 or min(self.q_t) < 0 or self.slack_weight < 0:
            raise ValueError("weights must be non-negative")
        if self.r_r <= 0 or self.r_p <= 0:
            raise ValueError("radii must be positive")
        if self.horizon_n < 1 or self.dt <= 0:
            raise ValueError("horizon_n >= 1 and dt > 0 required")

    @property
    def safe_distance(self) -> float:
        return self.r_r + self.r_p

    def with_goal(self, goal: RobotState) -> "MpcProblem":
        return replace(self, goal=goal)


@dataclass(frozen=True, eq=False)
class ObstacleForecast:
    """Positions (P, horizon_n + 1, 2) on the planner grid, t = 0 first.

    ``inflation`` (P, horizon_n + 1) is added to the pedestrian radius.
    """

    positions: np.ndarray
    inflation: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, *np.shape(self.positions)[-2:]) \
            if np.size(self.positions) else np.zeros((0, 1, 2))
        if not np.all(np.isfinite(pos)):
            raise ValueError("forecast contains non-finite positions")
        object.__setattr__(self, "positions", pos)
        infl = np.zeros(pos.shape[:2]) if self.inflation is None else np.asarray(self.inflation, dtype=float)
        object.__setattr__(self, "inflation", infl.reshape(pos.shape[:2]))

    @classmethod
    def empty(cls, horizon_n: int) -> "ObstacleForecast":
        return cls(np.zeros((0, horizon_n + 1, 2)))

    @property
    def n_peds(self) -> int:
        return self.positions.shape[0]


@dataclass(eq=False)
class MpcSolution:
    controls: np.ndarray  # (N, 2)
    predicted_states: np.ndarray  # (N + 1, 3)
    cost: float
    max_constraint_violation: float
    iterations: int
    solve_time: float
    status: SolveStatus
    objective_trace: list = field(default_factory=list)

    @property
    def first_control(self) -> ControlInput:
        return ControlInput(float(self.controls[0, 0]), float(self.controls[0, 1]))

    def trajectory(self, dt: float) -> RobotTrajectory:
        return RobotTrajectory(tuple(RobotState.from_array(s) for s in self.predicted_states), dt)


def stage_cost(state: RobotState, control: ControlInput, problem: MpcProblem) -> float:
    e = _state_error(state.as_array(), problem.goal)
    return float(np.dot(problem.q, e * e) + np.dot(problem.r, np.array([control.v, control.omega]) ** 2))


def terminal_cost(state: RobotState, problem: MpcProblem) -> float:
    e = _state_error(state.as_array(), problem.goal)
    return float(np.dot(problem.q_t, e * e))


def _state_error(x: np.ndarray, goal: RobotState) -> np.ndarray:
    return np.array([x[0] - goal.x, x[1] - goal.y, wrap_angle(x[2] - goal.theta)])


def collision_penalty(states, forecast: ObstacleForecast, problem: MpcProblem) -> tuple[float, float]:
    """Quadratic penalty on intrusion into the safety discs; returns (penalty, max violation)."""
    xy = _positions(states)
    viol = _violations(xy, forecast, problem)
    if viol.size == 0:
        return 0.0, 0.0
    return float(problem.slack_weight * np.sum(viol ** 2)), float(viol.max())


def _positions(states) -> np.ndarray:
    if isinstance(states, RobotTrajectory):
        return states.as_array()[:, :2]
    return np.asarray(states, dtype=float)[:, :2]


def _violations(xy: np.ndarray, forecast: ObstacleForecast, problem: MpcProblem) -> np.ndarray:
    if forecast.n_peds == 0:
        return np.zeros((0, xy.shape[0]))
    if forecast.positions.shape[1] != xy.shape[0]:
        raise ValueError(f"forecast grid {forecast.positions.shape[1]} != trajectory length {xy.shape[0]}")
    dist = np.linalg.norm(xy[None] - forecast.positions, axis=-1)
    return np.maximum(0.0, problem.safe_distance + forecast.inflation - dist)


def _fast_rollout(x0: np.ndarray, u: np.ndarray, dt: float):
    """Vectorized RK4 rollout with unwrapped heading, plus per-step stage terms.

    Heading never depends on position, so all stage headings follow from a
    cumulative sum and positions from a second one. Agrees with the sequential
    integrator to rounding; final plans are recomputed sequentially.
    """
    v, w = u[:, 0], u[:, 1]
    n = u.shape[0]
    th = np.empty(n + 1)
    th[0] = x0[2]
    th[1:] = x0[2] + np.cumsum(dt * w)
    th_k = th[:-1]
    th_mid = th_k + 0.5 * dt * w
    th_end = th_k + dt * w
    c1, s1 = np.cos(th_k), np.sin(th_k)
    c2, s2 = np.cos(th_mid), np.sin(th_mid)
    c4, s4 = np.cos(th_end), np.sin(th_end)
    k6 = dt / 6.0
    sc = c1 + 4.0 * c2 + c4
    ss = s1 + 4.0 * s2 + s4
    xs = np.empty((n + 1, 3))
    xs[0] = x0
    xs[1:, 0] = x0[0] + np.cumsum(k6 * v * sc)
    xs[1:, 1] = x0[1] + np.cumsum(k6 * v * ss)
    xs[:, 2] = th
    return xs, (c2, s2, c4, s4, sc, ss)


class _Residuals:
    """Residual vector and Jacobian of the planner objective for one problem instance."""

    def __init__(self, problem: MpcProblem, x0: np.ndarray, forecast: ObstacleForecast):
        self.p = problem
        self.x0 = x0
        self.fc = forecast
        self.sq = np.sqrt(np.asarray(problem.q, dtype=float))
        self.sqt = np.sqrt(np.asarray(problem.q_t, dtype=float))
        self.sr = np.sqrt(np.asarray(problem.r, dtype=float))
        self.ss = math.sqrt(problem.slack_weight)
        self.goal = np.array([problem.goal.x, problem.goal.y, problem.goal.theta])
        self.radius = problem.safe_distance + forecast.inflation  # (P, N+1)
        n = problem.horizon_n
        # strict[t, s] = 1 when control s acts before state t
        self.strict = np.tri(n + 1, n, -1)

    def state_errors(self, xs: np.ndarray) -> np.ndarray:
        e = xs - self.goal
        e[:, 2] = (e[:, 2] + math.pi) % (2 * math.pi) - math.pi
        return e

    def rollout(self, u: np.ndarray):
        return _fast_rollout(self.x0, u, self.p.dt)

    def objective(self, u: np.ndarray, xs: np.ndarray) -> float:
        e = self.state_errors(xs)
        f = float(np.sum((self.sq * e[:-1]) ** 2) + np.sum((self.sqt * e[-1]) ** 2) + np.sum((self.sr * u) ** 2))
        if self.fc.n_peds:
            dist = np.linalg.norm(xs[None, :, :2] - self.fc.positions, axis=-1)
            viol = np.maximum(0.0, self.radius - dist)
            f += self.p.slack_weight * float(np.sum(viol ** 2))
        return f

    def sensitivities(self, u: np.ndarray, stages) -> np.ndarray:
        """S[t] = d x_t / d u as an (N+1, 3, 2N) array, control order (v0, w0, v1, w1, ...)."""
        n, dt = self.p.horizon_n, self.p.dt
        c2, s2, c4, s4, sc, ss = stages
        v = u[:, 0]
        k6 = dt / 6.0
        h2 = 0.5 * dt
        # per-step partials of the position increment
        a = np.stack([-k6 * v * ss, k6 * v * sc], axis=1)  # w.r.t. stage heading
        bv = np.stack([k6 * sc, k6 * ss], axis=1)
        bw = np.stack([-k6 * v * (4.0 * s2 * h2 + s4 * dt), k6 * v * (4.0 * c2 * h2 + c4 * dt)], axis=1)
        csum = np.vstack([np.zeros((1, 2)), np.cumsum(a, axis=0)])  # csum[j] = sum_{k<j} a_k
        S = np.zeros((n + 1, 3, 2 * n))
        mask = self.strict
        S[:, :2, 0::2] = mask[:, None, :] * bv.T[None]
        # heading after step s shifts every later increment: sum_{s<k<t} a_k
        later = csum[:, None, :] - csum[None, 1:, :]  # [t, s] = sum_{s+1 <= k < t} a_k
        S[:, :2, 1::2] = mask[:, None, :] * (bw.T[None] + dt * np.transpose(later, (0, 2, 1)))
        S[:, 2, 1::2] = dt * mask
        return S

    def linearize(self, u: np.ndarray, xs: np.ndarray, stages):
        """Return (residuals, Jacobian w.r.t. flattened controls)."""
        n = self.p.horizon_n
        nv = 2 * n
        S = self.sensitivities(u, stages)
        e = self.state_errors(xs)
        res = [(self.sq * e[:-1]).ravel(), self.sqt * e[-1], (self.sr * u).ravel()]
        jac = [(self.sq[None, :, None] * S[:-1]).reshape(-1, nv), self.sqt[:, None] * S[-1],
               np.diag(np.tile(self.sr, n))]
        if self.fc.n_peds:
            diff = xs[None, :, :2] - self.fc.positions
            dist = np.linalg.norm(diff, axis=-1)
            viol = self.radius - dist
            ii, tt = np.nonzero(viol > 0)
            if ii.size:
                res.append(self.ss * viol[ii, tt])
                unit = diff[ii, tt] / np.maximum(dist[ii, tt], 1e-9)[:, None]
                jac.append(-self.ss * np.einsum("kj,kjv->kv", unit, S[tt, :2, :]))
        return np.concatenate(res), np.vstack(jac)


def _project(u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(u, lo), hi)


def _optimize(res: _Residuals, u0: np.ndarray, lo: np.ndarray, hi: np.ndarray, max_iters: int, deadline: float | None):
    """Projected Gauss-Newton; returns (controls, states, objective trace, iterations, status)."""
    p = res.p
    u = _project(u0, lo, hi)
    xs, stages = res.rollout(u)
    f = res.objective(u, xs)
    trace = [f]
    flo, fhi = lo.ravel(), hi.ravel()
    status = SolveStatus.ITERATION_LIMIT
    it = 0
    for it in range(1, max_iters + 1):
        if deadline is not None and time.perf_counter() > deadline:
            status = SolveStatus.BUDGET_EXCEEDED
            it -= 1
            break
        r, J = res.linearize(u, xs, stages)
        g = 2.0 * J.T @ r
        H = 2.0 * J.T @ J
        uf = u.ravel()
        # variables pinned at a bound with the gradient pushing outward stay fixed
        act = ((uf <= flo + 1e-10) & (g > 0)) | ((uf >= fhi - 1e-10) & (g < 0))
        free = ~act
        d = np.zeros_like(uf)
        if free.any():
            Hf = H[np.ix_(free, free)]
            Hf[np.diag_indices_from(Hf)] += 1e-8 * (1.0 + np.trace(Hf) / Hf.shape[0])
            d[free] = -np.linalg.solve(Hf, g[free])
        accepted = False
        for direction in (d, -g):
            alpha = 1.0
            for _ in range(30):
                cand = _project(uf + alpha * direction, flo, fhi)
                step = cand - uf
                dec = float(g @ step)
                if dec >= 0:
                    alpha *= 0.5
                    continue
                cu = cand.reshape(u.shape)
                cx, cst = res.rollout(cu)
                fc = res.objective(cu, cx)
                if fc <= f + 1e-4 * dec:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted:
            status = SolveStatus.OPTIMAL
            break
        rel = (f - fc) / max(1.0, abs(f))
        step_norm = float(np.linalg.norm(step))
        u, xs, f, stages = cu, cx, fc, cst
        trace.append(f)
        if rel < p.tol or step_norm < p.tol:
            status = SolveStatus.OPTIMAL
            break
    return u, xs, trace, it, status


def _shift(prev: MpcSolution, n: int) -> np.ndarray:
    c = np.asarray(prev.controls, dtype=float)
    if c.shape[0] != n:
        c = np.resize(c, (n, 2))
    return np.vstack([c[1:], c[-1:]])


def _arc_guess(x0: np.ndarray, goal: RobotState, n: int, dt: float, turn: float, vmax: float) -> np.ndarray:
    """Constant-speed guess that heads toward the goal, biased by ``turn`` rad/s."""
    bearing = math.atan2(goal.y - x0[1], goal.x - x0[0])
    err = wrap_angle(bearing - x0[2])
    dist = math.hypot(goal.x - x0[0], goal.y - x0[1])
    v = min(vmax, dist / max(n * dt, 1e-9))
    u = np.zeros((n, 2))
    u[:, 0] = v * max(0.0, math.cos(err))
    u[:, 1] = np.clip(err / (n * dt) + turn, -1.0, 1.0)
    return u


def braking_fallback(problem: MpcProblem, initial: RobotState, current_v: float = 0.0) -> np.ndarray:
    """Ramp the speed to zero at the braking limit while holding heading."""
    n, dt = problem.horizon_n, problem.dt
    v = np.clip(current_v, *problem.v_bounds)
    out = np.zeros((n, 2))
    for k in range(n):
        v = math.copysign(max(0.0, abs(v) - problem.brake_decel * dt), v)
        out[k, 0] = v
    return out


def solve(problem: MpcProblem, initial: RobotState, forecast: ObstacleForecast | None = None,
          warm_start: MpcSolution | None = None) -> MpcSolution:
    t0 = time.perf_counter()
    n = problem.horizon_n
    forecast = ObstacleForecast.empty(n) if forecast is None else forecast
    if forecast.n_peds and forecast.positions.shape[1] != n + 1:
        raise ValueError(f"forecast grid has {forecast.positions.shape[1]} points, expected {n + 1}")
    x0 = initial.as_array()
    lo = np.tile([problem.v_bounds[0], problem.omega_bounds[0]], (n, 1)).astype(float)
    hi = np.tile([problem.v_bounds[1], problem.omega_bounds[1]], (n, 1)).astype(float)
    res = _Residuals(problem, x0, forecast)
    deadline = None if problem.solve_budget is None else t0 + problem.solve_budget

    starts = []
    if warm_start is not None:
        starts.append(_shift(warm_start, n))
    else:
        starts.append(np.zeros((n, 2)))
    if problem.multi_start and forecast.n_peds:
        # side-passing guesses break the symmetry of a pedestrian dead ahead
        for turn in (0.0, 0.6, -0.6):
            starts.append(_arc_guess(x0, problem.goal, n, problem.dt, turn, problem.v_bounds[1]))

    best = None
    total_iters = 0
    try:
        if len(starts) > 1:
            # short screening run from every start, then continue the most promising one
            screened = []
            for u0 in starts:
                u, xs, trace, iters, status = _optimize(res, u0, lo, hi, problem.screen_iters, deadline)
                total_iters += iters
                screened.append((trace[-1], u, trace, status))
            f0, u_best, trace0, status0 = min(screened, key=lambda c: c[0])
            if status0 == SolveStatus.OPTIMAL or status0 == SolveStatus.BUDGET_EXCEEDED:
                best = (u_best, None, trace0, status0)
            else:
                remaining = max(1, problem.max_iters - problem.screen_iters)
                u, xs, trace, iters, status = _optimize(res, u_best, lo, hi, remaining, deadline)
                total_iters += iters
                best = (u, xs, trace0 + trace[1:], status)
        else:
            u, xs, trace, iters, status = _optimize(res, starts[0], lo, hi, problem.max_iters, deadline)
            total_iters += iters
            best = (u, xs, trace, status)
        if not math.isfinite(best[2][-1]):
            raise FloatingPointError("non-finite objective")
    except (FloatingPointError, np.linalg.LinAlgError, ValueError):
        best = None
    if best is None:
        v0 = float(warm_start.controls[0, 0]) if warm_start is not None else 0.0
        u = braking_fallback(problem, initial, v0)
        xs = rollout_array(x0, u, problem.dt)
        viol = _violations(xs[:, :2], forecast, problem)
        return MpcSolution(u, xs, float("nan"), float(viol.max()) if viol.size else 0.0, total_iters,
                           time.perf_counter() - t0, SolveStatus.INFEASIBLE_FALLBACK, [])
    u, _, trace, status = best
    xs = rollout_array(x0, u, problem.dt)
    cost = res.objective(u, xs)
    viol = _violations(xs[:, :2], forecast, problem)
    return MpcSolution(u, xs, cost, float(viol.max()) if viol.size else 0.0, total_iters,
                       time.perf_counter() - t0, status, trace)


def select_representative(pred: PredictionSet, strategy: str = "mean", inflation_scale: float = 1.0):
    """Collapse M samples to one trajectory (N, 2) plus a per-step radius inflation (N,)."""
    s = pred.samples
    zero = np.zeros(s.shape[1])
    if s.shape[0] == 1:
        return s[0].copy(), zero
    if strategy == "mean":
        return s.mean(axis=0), zero
    if strategy == "medoid":
        d = np.linalg.norm(s[:, None] - s[None], axis=-1).sum(axis=(1, 2))
        return s[int(np.argmin(d))].copy(), zero
    if strategy == "inflate":
        lam = max_eigenvalues(step_covariances(s))
        return s.mean(axis=0), inflation_scale * np.sqrt(np.maximum(lam, 0.0))
    raise ValueError(f"unknown representative strategy {strategy!r}")


def build_forecast(preds: list[PredictionSet], currents, problem: MpcProblem, strategy: str = "mean",
                   inflation_scale: float = 1.0) -> ObstacleForecast:
    """Planner-grid forecast from predictions already resampled to ``problem.dt``.

    ``currents`` holds each pedestrian's position at t = 0.
    """
    n = problem.horizon_n
    if not preds:
        return ObstacleForecast.empty(n)
    pos = np.zeros((len(preds), n + 1, 2))
    infl = np.zeros((len(preds), n + 1))
    for i, (pred, cur) in enumerate(zip(preds, currents)):
        traj, rad = select_representative(pred, strategy, inflation_scale)
        if traj.shape[0] < n:
            raise ValueError(f"prediction has {traj.shape[0]} steps, planner needs {n}")
        pos[i, 0] = cur
        pos[i, 1:] = traj[:n]
        infl[i, 1:] = rad[:n]
    return ObstacleForecast(pos, infl)
