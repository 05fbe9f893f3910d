"""Unicycle kinematics and RK4 discretization.

The same integrator drives both the simulated plant and the planner's internal
model, so plant and plan agree bit-for-bit when run at the same step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_DT = 0.1
V_LIMIT = 1.0
OMEGA_LIMIT = 1.0


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, arr) -> "RobotState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float

    def clamped(self, v_bounds=(-V_LIMIT, V_LIMIT), omega_bounds=(-OMEGA_LIMIT, OMEGA_LIMIT)) -> "ControlInput":
        return ControlInput(
            min(max(self.v, v_bounds[0]), v_bounds[1]),
            min(max(self.omega, omega_bounds[0]), omega_bounds[1]),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class RobotTrajectory:
    states: tuple[RobotState, ...]
    dt: float

    def __post_init__(self):
        if len(self.states) < 1:
            raise ValueError("trajectory needs at least one state")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> RobotState:
        return self.states[-1]

    def as_array(self) -> np.ndarray:
        return np.array([[s.x, s.y, s.theta] for s in self.states])


def unicycle_derivative(state: RobotState, control: ControlInput) -> tuple[float, float, float]:
    return (
        control.v * math.cos(state.theta),
        control.v * math.sin(state.theta),
        control.omega,
    )


def _rk4_raw(x: float, y: float, th: float, v: float, w: float, dt: float) -> tuple[float, float, float]:
    # Position does not feed back into the derivative, so only heading stages matter.
    h2 = 0.5 * dt
    c1, s1 = math.cos(th), math.sin(th)
    th2 = th + h2 * w
    c2, s2 = math.cos(th2), math.sin(th2)
    # stage 3 heading equals stage 2 heading for constant omega
    th4 = th + dt * w
    c4, s4 = math.cos(th4), math.sin(th4)
    xn = x + dt / 6.0 * (v * c1 + 4.0 * v * c2 + v * c4)
    yn = y + dt / 6.0 * (v * s1 + 4.0 * v * s2 + v * s4)
    return xn, yn, wrap_angle(th + dt * w)


def rk4_step(state: RobotState, control: ControlInput, dt: float = DEFAULT_DT) -> RobotState:
    """Advance one step of classic RK4 with the control held constant over the step."""
    vals = (state.x, state.y, state.theta, control.v, control.omega, dt)
    if not all(math.isfinite(val) for val in vals):
        raise ValueError(f"non-finite input to rk4_step: state={state}, control={control}, dt={dt}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return RobotState(*_rk4_raw(*vals))


def rollout(initial: RobotState, controls: Sequence[ControlInput], dt: float = DEFAULT_DT) -> RobotTrajectory:
    if len(controls) == 0:
        raise ValueError("rollout needs a non-empty control sequence")
    states = [initial]
    for u in controls:
        states.append(rk4_step(states[-1], u, dt))
    return RobotTrajectory(tuple(states), dt)


def rollout_array(x0: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    """Array form of rollout: controls (N, 2) -> states (N + 1, 3)."""
    n = controls.shape[0]
    out = np.empty((n + 1, 3))
    x, y, th = float(x0[0]), float(x0[1]), float(x0[2])
    out[0] = (x, y, th)
    for k in range(n):
        x, y, th = _rk4_raw(x, y, th, float(controls[k, 0]), float(controls[k, 1]), dt)
        out[k + 1] = (x, y, th)
    return out


def rk4_step_jacobians(th: float, v: float, w: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of one RK4 step w.r.t. state (3x3) and control (3x2).

    Only the heading enters the derivative, which keeps the chain short: every
    stage heading is th + c * dt * w for c in {0, 1/2, 1/2, 1}.
    """
    h2 = 0.5 * dt
    th2 = th + h2 * w
    th4 = th + dt * w
    c1, s1 = math.cos(th), math.sin(th)
    c2, s2 = math.cos(th2), math.sin(th2)
    c4, s4 = math.cos(th4), math.sin(th4)
    k = dt / 6.0

    A = np.eye(3)
    A[0, 2] = -k * v * (s1 + 4.0 * s2 + s4)
    A[1, 2] = k * v * (c1 + 4.0 * c2 + c4)

    B = np.zeros((3, 2))
    B[0, 0] = k * (c1 + 4.0 * c2 + c4)
    B[1, 0] = k * (s1 + 4.0 * s2 + s4)
    B[0, 1] = -k * v * (4.0 * s2 * h2 + s4 * dt)
    B[1, 1] = k * v * (4.0 * c2 * h2 + c4 * dt)
    B[2, 1] = dt
    return A, B
