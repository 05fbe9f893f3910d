import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crowdnav_mpc.dynamics import ControlInput, RobotState, rk4_step, rollout, rollout_array
from crowdnav_mpc.metrics import ade, amd, amv, fde, jerk_from_speed
from crowdnav_mpc.planner import MpcProblem, ObstacleForecast, solve
from crowdnav_mpc.prediction import PredictionSet, pad_history, predict_cv, predict_cv_sampled
from crowdnav_mpc.prediction.resample import resample_to_grid

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
coord = st.floats(-10, 10, allow_nan=False)


@st.composite
def instances(draw, min_m=1):
    m = draw(st.integers(min_m, 20))
    n = draw(st.integers(1, 12))
    samples = draw(arrays(float, (m, n, 2), elements=coord))
    truth = draw(arrays(float, (n, 2), elements=coord))
    return samples, truth


def _rot(th):
    return np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])


def _close(a, b, rel=1e-9, abs_=1e-9):
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)


# ---- metrics -------------------------------------------------------------

@SETTINGS
@given(instances(), st.tuples(st.floats(-100, 100), st.floats(-100, 100)))
def test_ade_fde_translation_invariant(inst, shift):
    s, t = inst
    off = np.array(shift)
    assert _close(ade(s + off, t + off), ade(s, t))
    assert _close(fde(s + off, t + off), fde(s, t))


@SETTINGS
@given(instances(min_m=2), st.tuples(st.floats(-100, 100), st.floats(-100, 100)))
def test_amd_translation_invariant(inst, shift):
    s, t = inst
    off = np.array(shift)
    # the shift costs a few digits of the covariance, hence the looser bound
    assert _close(amd(s + off, t + off), amd(s, t), rel=1e-6)


@SETTINGS
@given(instances(min_m=2), st.floats(-math.pi, math.pi))
def test_rotation_invariance(inst, th):
    s, t = inst
    r = _rot(th)
    assert _close(ade(s @ r.T, t @ r.T), ade(s, t))
    assert _close(fde(s @ r.T, t @ r.T), fde(s, t))
    mean = s.mean(axis=0)
    assert _close(amv((s - mean) @ r.T + mean), amv(s), rel=1e-9, abs_=1e-9)


@SETTINGS
@given(instances(min_m=2), st.floats(0.1, 10))
def test_amv_scales_quadratically(inst, scale):
    s, _ = inst
    mean = s.mean(axis=0)
    assert _close(amv(mean + scale * (s - mean)), scale ** 2 * amv(s), abs_=1e-9)


@SETTINGS
@given(instances())
def test_fde_bounded_by_n_ade(inst):
    s, t = inst
    assert fde(s, t) <= t.shape[0] * ade(s, t) + 1e-12


@SETTINGS
@given(st.floats(-1, 1), st.floats(-2, 2), st.integers(4, 200), st.sampled_from([0.05, 0.1, 0.2]))
def test_affine_speed_has_zero_jerk(a, b, n, dt):
    v = a + b * np.arange(n) * dt
    assert jerk_from_speed(v, dt) <= 1e-6


# ---- dynamics ------------------------------------------------------------

states = st.builds(RobotState, coord, coord, st.floats(-math.pi, math.pi))
controls = st.builds(ControlInput, st.floats(-1, 1), st.floats(-1, 1))


@SETTINGS
@given(states, st.floats(-1, 1), st.floats(0.01, 0.5))
def test_rk4_exact_straight_line(s, v, dt):
    nxt = rk4_step(s, ControlInput(v, 0.0), dt)
    assert abs(nxt.x - (s.x + v * dt * math.cos(s.theta))) <= 1e-12
    assert abs(nxt.y - (s.y + v * dt * math.sin(s.theta))) <= 1e-12


@SETTINGS
@given(states, st.floats(-1, 1), st.floats(0.01, 0.5))
def test_rk4_exact_turn_in_place(s, w, dt):
    nxt = rk4_step(s, ControlInput(0.0, w), dt)
    assert nxt.x == s.x and nxt.y == s.y
    d = math.remainder(nxt.theta - (s.theta + w * dt), 2 * math.pi)
    assert abs(d) <= 1e-12


@SETTINGS
@given(states, st.lists(controls, min_size=1, max_size=10), st.lists(controls, min_size=1, max_size=10))
def test_rollout_composition(s, a, b):
    whole = rollout(s, a + b, 0.1)
    first = rollout(s, a, 0.1)
    second = rollout(first.final, b, 0.1)
    assert whole.states == first.states + second.states[1:]


@SETTINGS
@given(states, st.lists(st.builds(ControlInput, st.floats(-5, 5), st.floats(-50, 50)), min_size=1, max_size=30))
def test_heading_bounded(s, us):
    for st_ in rollout(s, us, 0.1).states[1:]:
        assert -math.pi < st_.theta <= math.pi


# ---- prediction ----------------------------------------------------------

@SETTINGS
@given(arrays(float, st.tuples(st.integers(1, 12), st.just(2)), elements=coord), st.integers(1, 10))
def test_pad_idempotent(raw, n_h):
    once = pad_history(raw, n_h)
    twice = pad_history(once.positions, n_h)
    assert np.array_equal(once.positions, twice.positions)


@SETTINGS
@given(st.tuples(coord, coord), st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.integers(1, 12))
def test_cv_exact_on_uniform_motion(p0, vel, n):
    p0, vel = np.array(p0), np.array(vel)
    steps = np.arange(8 + n)[:, None] * 0.4
    track = p0 + steps * vel
    pred = predict_cv(pad_history(track[:8], 8), n)
    assert np.max(np.abs(pred.samples[0] - track[8:])) <= 1e-12 * max(1.0, np.max(np.abs(track)))
    assert ade(pred, track[8:]) <= 1e-10 and fde(pred, track[8:]) <= 1e-10


@SETTINGS
@given(arrays(float, (8, 2), elements=coord), st.integers(0, 2 ** 31), st.integers(0, 1000))
def test_cv_sampling_is_a_pure_function(hist, seed, cycle):
    h = pad_history(hist, 8)
    a = predict_cv_sampled(h, 12, 20, 0.1, seed, cycle)
    b = predict_cv_sampled(h, 12, 20, 0.1, seed, cycle)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.samples[0], predict_cv(h, 12).samples[0])


@SETTINGS
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 12), st.just(2)), elements=coord),
       st.sampled_from([0.1, 0.4]))
def test_resample_identity(samples, dt):
    pred = PredictionSet(samples, dt, origin=np.zeros(2))
    same = resample_to_grid(pred, dt, samples.shape[1])
    assert np.array_equal(same.samples, pred.samples)


# ---- planner -------------------------------------------------------------

@settings(max_examples=12, deadline=None)
@given(st.floats(-3, 3), st.floats(1, 5), st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5), st.floats(0.5, 3))
def test_solution_feasible_by_construction(gx, gy, th, ox, oy):
    prob = MpcProblem(RobotState(gx, gy, 0.0), horizon_n=10, max_iters=15, solve_budget=None)
    fc = ObstacleForecast(np.tile([[ox, oy]], (1, 11, 1)), np.zeros((1, 11)))
    sol = solve(prob, RobotState(0.0, 0.0, th), fc)
    assert np.all(np.abs(sol.controls) <= 1.0)
    assert np.array_equal(sol.predicted_states, rollout_array(np.array([0.0, 0.0, th]), sol.controls, prob.dt))
    trace = sol.objective_trace
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(trace, trace[1:]))
