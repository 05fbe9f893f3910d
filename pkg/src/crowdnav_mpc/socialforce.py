"""First-order social-force crowd model shared by the simulator and the data generator.

Each pedestrian walks toward its current waypoint at a preferred speed; an
exponential repulsion from nearby agents is added to the desired velocity and
clipped to ``REPULSION_SPEED_BOUND``, so one step never moves a pedestrian
farther than ``(preferred_speed + REPULSION_SPEED_BOUND) * dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WAYPOINT_TOL = 0.1
REPULSION_SPEED_BOUND = 0.8  # m/s


@dataclass
class SocialForceParams:
    strength: float = 1.5  # m/s at contact
    range: float = 0.5  # m, exponential decay length
    agent_radius: float = 0.3  # m
    robot_radius: float = 0.4  # m
    # pedestrians only react to agents in front of them (cosine of half field of view)
    fov_cos: float = -0.2
    bound: float = REPULSION_SPEED_BOUND


def repulsion(pos: np.ndarray, heading: np.ndarray, others: np.ndarray, other_radii: np.ndarray,
              params: SocialForceParams, self_mask: np.ndarray | None = None) -> np.ndarray:
    """Repulsive velocity for each of ``pos`` (P, 2) from ``others`` (Q, 2).

    ``heading`` (P, 2) is the unit desired direction used for the field-of-view
    weighting; agents behind get half weight. ``self_mask`` (P, Q) excludes pairs.
    """
    if others.shape[0] == 0 or pos.shape[0] == 0:
        return np.zeros_like(pos)
    diff = pos[:, None, :] - others[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 1e-9, dist, 1.0)
    n = diff / safe[..., None]
    gap = dist - (params.agent_radius + other_radii[None, :])
    mag = params.strength * np.exp(-gap / params.range)
    in_front = np.einsum("pj,pqj->pq", heading, -n) > params.fov_cos
    mag = mag * np.where(in_front, 1.0, 0.5)
    if self_mask is not None:
        mag = np.where(self_mask, 0.0, mag)
    mag = np.where(dist > 1e-9, mag, 0.0)
    f = np.sum(mag[..., None] * n, axis=1)
    norm = np.linalg.norm(f, axis=-1, keepdims=True)
    scale = np.minimum(1.0, params.bound / np.maximum(norm, 1e-12))
    return f * scale


def desired_velocity(pos: np.ndarray, target: np.ndarray, speed: np.ndarray, dt: float) -> np.ndarray:
    """Velocity toward ``target`` that never overshoots it within ``dt``."""
    d = target - pos
    dist = np.linalg.norm(d, axis=-1, keepdims=True)
    unit = np.where(dist > 1e-12, d / np.maximum(dist, 1e-12), 0.0)
    step = np.minimum(speed[:, None], dist / dt)
    return unit * step


@dataclass
class Crowd:
    """Pedestrians following waypoint lists, advanced in lock-step."""

    positions: np.ndarray  # (P, 2)
    routes: list  # list of (W_i, 2) arrays; routes[i][0] is the start
    speeds: np.ndarray  # (P,)
    delays: np.ndarray  # (P,) seconds before a pedestrian starts walking
    wp_index: np.ndarray  # (P,) index of the waypoint currently targeted
    time: float = 0.0

    @classmethod
    def from_routes(cls, routes, speeds, delays=None) -> "Crowd":
        routes = [np.asarray(r, dtype=float).reshape(-1, 2) for r in routes]
        p = len(routes)
        pos = np.array([r[0] for r in routes]).reshape(p, 2)
        delays = np.zeros(p) if delays is None else np.asarray(delays, dtype=float)
        return cls(pos, routes, np.asarray(speeds, dtype=float).reshape(p), delays,
                   np.array([min(1, len(r) - 1) for r in routes], dtype=int))

    def copy(self) -> "Crowd":
        return Crowd(self.positions.copy(), self.routes, self.speeds.copy(), self.delays.copy(),
                     self.wp_index.copy(), self.time)

    def targets(self) -> np.ndarray:
        return np.array([r[i] for r, i in zip(self.routes, self.wp_index)]).reshape(-1, 2)

    def finished(self) -> np.ndarray:
        return np.array([i == len(r) - 1 and np.linalg.norm(p - r[-1]) <= 1e-9
                         for r, i, p in zip(self.routes, self.wp_index, self.positions)], dtype=bool)

    def step(self, dt: float, robot: np.ndarray | None = None, params: SocialForceParams | None = None) -> None:
        """Advance all pedestrians by ``dt``; repulsion is off when ``params`` is None."""
        p = self.positions.shape[0]
        if p == 0:
            self.time += dt
            return
        # switch to the next waypoint once within tolerance of the current one
        for i, r in enumerate(self.routes):
            while self.wp_index[i] < len(r) - 1 and np.linalg.norm(self.positions[i] - r[self.wp_index[i]]) <= WAYPOINT_TOL:
                self.wp_index[i] += 1
        active = self.time + 1e-9 >= self.delays
        vel = desired_velocity(self.positions, self.targets(), self.speeds, dt)
        if params is not None:
            speed = np.linalg.norm(vel, axis=-1, keepdims=True)
            heading = np.where(speed > 1e-12, vel / np.maximum(speed, 1e-12), 0.0)
            others = self.positions
            radii = np.full(p, params.agent_radius)
            mask = np.eye(p, dtype=bool)
            if robot is not None:
                others = np.vstack([others, np.asarray(robot, dtype=float).reshape(1, 2)])
                radii = np.append(radii, params.robot_radius)
                mask = np.hstack([mask, np.zeros((p, 1), dtype=bool)])
            rep = repulsion(self.positions, heading, others, radii, params, mask)
            # parked pedestrians stay put; walking ones sidestep
            walking = ~self.finished()
            vel = vel + rep * walking[:, None]
        vel = vel * active[:, None]
        self.positions = self.positions + dt * vel
        self.time += dt
