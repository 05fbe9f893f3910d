import math

import numpy as np
import pytest

from crowdnav_mpc.dynamics import ControlInput, RobotState, rollout_array
from crowdnav_mpc.planner import (MpcProblem, ObstacleForecast, SolveStatus, braking_fallback, build_forecast,
                                  collision_penalty, select_representative, solve, stage_cost, terminal_cost)
from crowdnav_mpc.prediction import PredictionSet

GOAL0 = RobotState(0, 0, 0)


def stationary(p, n=20):
    return ObstacleForecast(np.tile(np.asarray(p, float), (1, n + 1, 1)))


def test_stage_cost_examples():
    assert stage_cost(GOAL0, ControlInput(0, 0), MpcProblem(GOAL0)) == 0
    pr = MpcProblem(GOAL0, q=(1, 1, 0), r=(0, 0))
    assert stage_cost(RobotState(3, 4, 1.0), ControlInput(0, 0), pr) == pytest.approx(25)
    pr = MpcProblem(GOAL0, q=(0, 0, 0), r=(1, 1))
    assert stage_cost(GOAL0, ControlInput(0.5, -0.5), pr) == pytest.approx(0.5)


def test_terminal_cost_examples():
    pr = MpcProblem(RobotState(1, 2, 0.3))
    assert terminal_cost(RobotState(1, 2, 0.3), pr) == 0
    s = RobotState(2, 0, 1.0)
    assert terminal_cost(s, pr) == pytest.approx(10 * stage_cost(s, ControlInput(0, 0), pr))
    assert terminal_cost(RobotState(1, 2, 0.3 + 2 * math.pi), pr) == pytest.approx(0, abs=1e-20)


def test_collision_penalty_examples():
    pr = MpcProblem(GOAL0, horizon_n=2, slack_weight=1000.0)
    states = np.zeros((3, 3))
    far = ObstacleForecast(np.array([[[2, 0], [2, 0], [2, 0]]], float))
    assert collision_penalty(states, far, pr) == (0.0, 0.0)
    edge = ObstacleForecast(np.array([[[0.7, 0], [5, 0], [5, 0]]], float))
    assert collision_penalty(states, edge, pr) == (0.0, 0.0)
    near = ObstacleForecast(np.array([[[5, 0], [0.6, 0], [5, 0]]], float))
    pen, viol = collision_penalty(states, near, pr)
    assert viol == pytest.approx(0.1)
    assert pen == pytest.approx(1000 * 0.01)


def test_solve_at_goal_is_fixed_point():
    sol = solve(MpcProblem(GOAL0), GOAL0)
    assert np.max(np.abs(sol.controls)) <= 1e-3
    assert sol.cost == pytest.approx(0, abs=1e-6)


def test_solve_moves_toward_goal_monotonically():
    pr = MpcProblem(RobotState(3, 0, 0), solve_budget=None)
    sol = solve(pr, GOAL0)
    assert np.linalg.norm(sol.predicted_states[-1, :2] - [3, 0]) < 3.0
    assert all(b <= a + 1e-12 for a, b in zip(sol.objective_trace, sol.objective_trace[1:]))


def test_solution_is_rollout_of_controls_and_in_bounds():
    pr = MpcProblem(RobotState(3, 1, 0), solve_budget=None)
    sol = solve(pr, RobotState(0, 0, 0.5), stationary((1.5, 0.5)))
    np.testing.assert_array_equal(sol.predicted_states, rollout_array(np.array([0, 0, 0.5]), sol.controls, pr.dt))
    assert np.all(np.abs(sol.controls) <= 1.0)


def test_stationary_obstacle_is_avoided():
    pr = MpcProblem(RobotState(3, 0, 0), solve_budget=None)
    sol = solve(pr, GOAL0, stationary((2.0, 0.0)))
    assert sol.max_constraint_violation <= 1e-3
    assert np.max(np.abs(sol.predicted_states[:, 1])) > 0.3


def test_solve_is_deterministic():
    pr = MpcProblem(RobotState(3, 0, 0), solve_budget=None)
    a = solve(pr, GOAL0, stationary((2.0, 0.0)))
    b = solve(pr, GOAL0, stationary((2.0, 0.0)))
    np.testing.assert_array_equal(a.controls, b.controls)


def test_warm_start_reduces_iterations():
    pr = MpcProblem(RobotState(3, 0, 0), solve_budget=None)
    state, warm = RobotState(0, 0, 0.3), None
    cold_iters, warm_iters = [], []
    for _ in range(15):
        cold = solve(pr, state)
        sol = solve(pr, state, warm_start=warm)
        cold_iters.append(cold.iterations)
        warm_iters.append(sol.iterations)
        state = RobotState.from_array(sol.predicted_states[1])
        warm = sol
    assert np.median(warm_iters) <= np.median(cold_iters)


def test_nonfinite_forecast_rejected_and_fallback_brakes():
    with pytest.raises(ValueError):
        ObstacleForecast(np.full((1, 21, 2), np.nan))
    u = braking_fallback(MpcProblem(GOAL0), GOAL0, current_v=1.0)
    assert u[0, 0] == pytest.approx(0.8)
    assert np.all(np.diff(u[:, 0]) <= 0) and u[-1, 0] == 0
    assert np.all(u[:, 1] == 0)


def test_status_values():
    assert {s.value for s in SolveStatus} == {"optimal", "iteration-limit", "budget-exceeded",
                                              "infeasible-fallback"}


def test_select_representative():
    one = PredictionSet(np.array([[[1, 2], [3, 4]]], float), 0.4)
    traj, r = select_representative(one)
    np.testing.assert_array_equal(traj, one.samples[0])
    mirrored = PredictionSet(np.array([[[1, 1], [2, 2]], [[1, -1], [2, -2]]], float), 0.4)
    traj, _ = select_representative(mirrored)
    np.testing.assert_array_equal(traj[:, 1], 0)
    same = PredictionSet(np.repeat(one.samples, 3, axis=0), 0.4)
    m_traj, _ = select_representative(same, "mean")
    i_traj, rad = select_representative(same, "inflate")
    np.testing.assert_array_equal(m_traj, i_traj)
    assert np.all(rad == 0)
    med, _ = select_representative(PredictionSet(np.array([[[0, 0]], [[1, 0]], [[5, 0]]], float), 0.4), "medoid")
    np.testing.assert_array_equal(med, [[1, 0]])
    with pytest.raises(ValueError):
        select_representative(mirrored, "bogus")


def test_build_forecast_anchors_current_position():
    pr = MpcProblem(GOAL0, horizon_n=3)
    pred = PredictionSet(np.array([[[1, 0], [2, 0], [3, 0]]], float), 0.1)
    fc = build_forecast([pred], [np.array([0.0, 0.0])], pr)
    np.testing.assert_array_equal(fc.positions[0], [[0, 0], [1, 0], [2, 0], [3, 0]])
    with pytest.raises(ValueError):
        build_forecast([pred], [np.zeros(2)], MpcProblem(GOAL0, horizon_n=5))


def test_problem_validation():
    with pytest.raises(ValueError):
        MpcProblem(GOAL0, r_r=0)
    with pytest.raises(ValueError):
        MpcProblem(GOAL0, q=(-1, 0, 0))
    with pytest.raises(ValueError):
        MpcProblem(GOAL0, horizon_n=0)
