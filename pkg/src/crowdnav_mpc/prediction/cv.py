"""Constant-velocity baseline, plain and with Gaussian velocity perturbation."""

from __future__ import annotations

import numpy as np

from .history import PedestrianHistory, PredictionSet
from .rng import stream

DEFAULT_SIGMA_V = 0.1


def cv_velocity(history: PedestrianHistory) -> np.ndarray:
    if history.observed_count < 2:
        return np.zeros(2)
    return (history.positions[-1] - history.positions[-2]) / history.dt_obs


def predict_cv(history: PedestrianHistory, n: int) -> PredictionSet:
    if n < 1:
        raise ValueError("prediction length must be >= 1")
    vel = cv_velocity(history)
    steps = np.arange(1, n + 1, dtype=float)[:, None] * history.dt_obs
    future = history.last + steps * vel
    return PredictionSet(future[None], history.dt_obs, history.ped_id, history.last)


def predict_cv_sampled(history: PedestrianHistory, n: int, m: int = 20, sigma_v: float = DEFAULT_SIGMA_V,
                       seed: int = 0, cycle: int = 0) -> PredictionSet:
    """M constant-velocity futures; sample 0 is the unperturbed extrapolation."""
    if m < 2:
        raise ValueError("sampled CV needs m >= 2")
    if sigma_v < 0:
        raise ValueError("sigma_v must be non-negative")
    base = predict_cv(history, n).samples[0]
    rng = stream(seed, "cv", history.ped_id, cycle)
    dv = sigma_v * rng.standard_normal((m, 2))
    dv[0] = 0.0
    steps = np.arange(1, n + 1, dtype=float)[None, :, None] * history.dt_obs
    samples = base[None] + steps * dv[:, None, :]
    return PredictionSet(samples, history.dt_obs, history.ped_id, history.last)
