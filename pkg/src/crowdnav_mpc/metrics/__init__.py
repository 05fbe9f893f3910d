from .closedloop import (ClosedLoopScores, MinDistance, accelerations, aggregate_open_loop, closed_loop_scores,
                         jerk, jerk_from_speed, min_distance, mpc_mse, open_loop_records, time_to_goal)
from .openloop import OpenLoopScores, ade, amd, amv, fde, improvement, open_loop_scores

__all__ = [
    "ClosedLoopScores", "MinDistance", "OpenLoopScores", "accelerations", "ade", "aggregate_open_loop", "amd", "amv",
    "closed_loop_scores", "fde", "improvement", "jerk", "jerk_from_speed", "min_distance", "mpc_mse",
    "open_loop_records", "open_loop_scores", "time_to_goal",
]
