from .runner import SimConfig, histories_at, plant_step, run_closed_loop, step_pedestrians
from .scenarios import (LayoutTable, PedestrianRoute, ScenarioSpec, builtin_scenarios, default_layout,
                        scenario_by_name)
from .simlog import SimLog, SimLogError, parse_simlog, read_simlog, simlog_from_arrays

__all__ = [
    "LayoutTable", "PedestrianRoute", "ScenarioSpec", "SimConfig", "SimLog", "SimLogError", "builtin_scenarios",
    "default_layout", "histories_at", "parse_simlog", "plant_step", "read_simlog", "run_closed_loop",
    "scenario_by_name", "simlog_from_arrays", "step_pedestrians",
]
