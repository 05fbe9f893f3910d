"""YAML run configuration shared by the simulator and the command line.

Schema (version 1), every section optional::

    version: 1
    seed: 0
    layout: {GP1: [-4, 8], ...}          # point overrides
    scenarios:                            # replaces the built-in ten
      - name: crossing
        robot_goal: GP2                   # layout name or [x, y]
        robot_start: SP
        duration_max: 40
        pedestrians:
          - {waypoints: [Red1, Red2], speed: 1.2, delay: 0.0}
    predictor: {m: 20, sigma_v: 0.1, model: model.json}
    planner: {horizon_n: 20, dt: 0.1, slack_weight: 1.0e5, ...}   # MpcProblem fields
    sim: {goal_tol: 0.1, ped_repulsion: true, ...}               # SimConfig fields
    training:
      hidden: [48, 48]
      noise_dim: 4
      config: {epochs: 40, k_imle: 3, ...}                       # TrainingConfig fields
      synthetic: {n_scenes: 60, peds_per_scene: 8, ...}          # SyntheticCrowdConfig fields
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .dynamics import RobotState
from .planner import MpcProblem
from .prediction.data import SyntheticCrowdConfig
from .prediction.imle import TrainingConfig
from .simulation.runner import SimConfig
from .simulation.scenarios import LayoutTable, ScenarioSpec, builtin_scenarios, default_layout

CONFIG_VERSION = 1
TOP_KEYS = {"version", "seed", "layout", "scenarios", "predictor", "planner", "sim", "training"}


class ConfigError(ValueError):
    pass


def _build(cls, values: dict | None, section: str, **fixed):
    values = dict(values or {})
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    for k, v in values.items():
        if isinstance(v, list):
            values[k] = tuple(v)
    try:
        return cls(**fixed, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass
class PredictorSettings:
    m: int = 20
    sigma_v: float = 0.1
    model: str | None = None


@dataclass
class TrainingSettings:
    hidden: tuple = (48, 48)
    noise_dim: int = 4
    config: TrainingConfig = field(default_factory=TrainingConfig)
    synthetic: SyntheticCrowdConfig = field(default_factory=SyntheticCrowdConfig)


@dataclass
class RunConfig:
    seed: int = 0
    layout: LayoutTable = field(default_factory=default_layout)
    scenarios: list = field(default_factory=builtin_scenarios)
    predictor: PredictorSettings = field(default_factory=PredictorSettings)
    planner: MpcProblem = field(default_factory=lambda: MpcProblem(RobotState(0.0, 0.0, 0.0)))
    sim: SimConfig = field(default_factory=SimConfig)
    training: TrainingSettings = field(default_factory=TrainingSettings)

    def seeded_scenarios(self, seed: int | None = None) -> list[ScenarioSpec]:
        s = self.seed if seed is None else seed
        out = []
        for sc in self.scenarios:
            out.append(ScenarioSpec(sc.name, sc.robot_goal, sc.pedestrians, sc.robot_start, sc.start_heading,
                                    sc.duration_max, s))
        return out


def parse_config(doc: dict | None, base_dir: Path | None = None) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {doc.get('version')!r}")
    cfg = RunConfig(seed=int(doc.get("seed", 0)))
    try:
        cfg.layout = cfg.layout.with_overrides(doc.get("layout"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"layout: {exc}") from None
    if "scenarios" in doc:
        specs = []
        for i, s in enumerate(doc["scenarios"] or []):
            s = dict(s)
            if "name" not in s or "robot_goal" not in s:
                raise ConfigError(f"scenarios[{i}]: name and robot_goal are required")
            s.pop("seed", None)
            spec = _build(ScenarioSpec, s, f"scenarios[{i}]")
            spec.robot_goal = list(spec.robot_goal) if isinstance(spec.robot_goal, tuple) else spec.robot_goal
            try:
                spec.validate(cfg.layout)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"scenarios[{i}]: {exc}") from None
            specs.append(spec)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ConfigError("scenario names must be unique")
        cfg.scenarios = specs
    cfg.predictor = _build(PredictorSettings, doc.get("predictor"), "predictor")
    if cfg.predictor.model and base_dir is not None and not Path(cfg.predictor.model).is_absolute():
        cfg.predictor.model = str(base_dir / cfg.predictor.model)
    cfg.planner = _build(MpcProblem, doc.get("planner"), "planner", goal=RobotState(0.0, 0.0, 0.0))
    cfg.sim = _build(SimConfig, doc.get("sim"), "sim")
    tr = dict(doc.get("training") or {})
    unknown = set(tr) - {"hidden", "noise_dim", "config", "synthetic"}
    if unknown:
        raise ConfigError(f"training: unknown keys {sorted(unknown)}")
    cfg.training = TrainingSettings(tuple(tr.get("hidden", (48, 48))), int(tr.get("noise_dim", 4)),
                                    _build(TrainingConfig, tr.get("config"), "training.config"),
                                    _build(SyntheticCrowdConfig, tr.get("synthetic"), "training.synthetic"))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    return parse_config(doc, path.parent)
