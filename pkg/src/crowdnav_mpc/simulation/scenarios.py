"""Layout table and the ten built-in test scenes."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from ..dynamics import RobotState

DEFAULT_PED_SPEED = 1.2
DEFAULT_DURATION = 40.0

# (robot goal, [pedestrian routes as (from, to)])
SCENE_TABLE = {
    "scene1": ("GP1", [("Red1", "Red2")]),
    "scene2": ("GP2", [("GP2", "Black5")]),
    "scene3": ("GP3", [("Green2", "Green1")]),
    "scene4": ("GP1", [("Red2", "Red1"), ("Black1", "Black2")]),
    "scene5": ("GP2", [("Red1", "Red2"), ("Green4", "Green3")]),
    "scene6": ("GP3", [("Black4", "Black3"), ("Green3", "Green4")]),
    "scene7": ("GP1", [("Black1", "Black2"), ("GP2", "Black5"), ("Green4", "Green3")]),
    "scene8": ("GP2", [("Red2", "Red1"), ("Red1", "Red2"), ("Black1", "Black2")]),
    "scene9": ("GP1", [("Black1", "Black2"), ("Green2", "Black1"), ("Red1", "Red2")]),
    "scene10": ("GP2", [("Black4", "Black3"), ("Green1", "Black2"), ("GP2", "Black5")]),
}


@dataclass
class LayoutTable:
    points: dict
    start_heading: float = float(np.pi / 2)

    def __post_init__(self):
        pts = {}
        for name, xy in self.points.items():
            arr = np.asarray(xy, dtype=float).reshape(2)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"layout point {name!r} is not finite")
            pts[str(name)] = arr
        if len(pts) != len(self.points):
            raise ValueError("layout names must be distinct")
        self.points = pts

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.points[name]
        except KeyError:
            raise KeyError(f"unknown layout point {name!r}; known: {sorted(self.points)}") from None

    def resolve(self, ref) -> np.ndarray:
        if isinstance(ref, str):
            return self[ref]
        return np.asarray(ref, dtype=float).reshape(2)

    def with_overrides(self, overrides: dict | None) -> "LayoutTable":
        pts = dict(self.points)
        pts.update(overrides or {})
        return LayoutTable(pts, self.start_heading)


def default_layout() -> LayoutTable:
    text = resources.files("crowdnav_mpc.data").joinpath("default_layout.yaml").read_text()
    doc = yaml.safe_load(text)
    return LayoutTable(doc["points"], float(doc.get("start_heading", np.pi / 2)))


@dataclass
class PedestrianRoute:
    waypoints: list  # names or [x, y]
    speed: float = DEFAULT_PED_SPEED
    delay: float = 0.0


@dataclass
class ScenarioSpec:
    name: str
    robot_goal: object  # name or [x, y]
    pedestrians: list = field(default_factory=list)
    robot_start: object = "SP"
    start_heading: float | None = None
    duration_max: float = DEFAULT_DURATION
    seed: int = 0

    def __post_init__(self):
        if self.duration_max <= 0:
            raise ValueError("duration_max must be positive")
        self.pedestrians = [p if isinstance(p, PedestrianRoute) else PedestrianRoute(**p) for p in self.pedestrians]

    def start_state(self, layout: LayoutTable) -> RobotState:
        xy = layout.resolve(self.robot_start)
        th = layout.start_heading if self.start_heading is None else self.start_heading
        return RobotState(float(xy[0]), float(xy[1]), float(th))

    def goal_point(self, layout: LayoutTable) -> np.ndarray:
        return layout.resolve(self.robot_goal)

    def routes(self, layout: LayoutTable) -> list[np.ndarray]:
        return [np.array([layout.resolve(w) for w in p.waypoints]) for p in self.pedestrians]

    def validate(self, layout: LayoutTable) -> None:
        self.goal_point(layout)
        self.routes(layout)


def builtin_scenarios(seed: int = 0) -> list[ScenarioSpec]:
    return [
        ScenarioSpec(name, goal, [PedestrianRoute(list(r)) for r in routes], seed=seed)
        for name, (goal, routes) in SCENE_TABLE.items()
    ]


def scenario_by_name(name: str, scenarios=None) -> ScenarioSpec:
    pool = {s.name: s for s in (scenarios or builtin_scenarios())}
    if name not in pool:
        raise KeyError(f"unknown scenario {name!r}; valid names: {', '.join(pool)}")
    return pool[name]
