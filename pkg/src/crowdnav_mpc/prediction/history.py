from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

DEFAULT_N_H = 8
DEFAULT_N_PRED = 12
DEFAULT_DT_OBS = 0.4


@dataclass(frozen=True, eq=False)
class PedestrianHistory:
    """Fixed-length window of past positions, oldest first.

    Left padding repeats the earliest observed point, so a pedestrian seen only
    once looks stationary to every predictor.
    """

    ped_id: Hashable
    positions: np.ndarray
    observed_count: int
    dt_obs: float = DEFAULT_DT_OBS

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must be (N_h, 2), got {pos.shape}")
        if not 1 <= self.observed_count <= pos.shape[0]:
            raise ValueError("observed_count must be in [1, N_h]")
        if not np.all(np.isfinite(pos)):
            raise ValueError("history contains non-finite positions")
        object.__setattr__(self, "positions", pos)

    @property
    def n_h(self) -> int:
        return self.positions.shape[0]

    @property
    def last(self) -> np.ndarray:
        return self.positions[-1]


def pad_history(raw, n_h: int = DEFAULT_N_H, ped_id: Hashable = 0, dt_obs: float = DEFAULT_DT_OBS) -> PedestrianHistory:
    pts = np.asarray(raw, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("cannot pad an empty history")
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    if pts.shape[0] >= n_h:
        return PedestrianHistory(ped_id, pts[-n_h:].copy(), n_h, dt_obs)
    pad = np.repeat(pts[:1], n_h - pts.shape[0], axis=0)
    return PedestrianHistory(ped_id, np.vstack([pad, pts]), pts.shape[0], dt_obs)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """M sampled futures of one pedestrian, shape (M, N, 2)."""

    samples: np.ndarray
    dt_pred: float
    ped_id: Hashable = 0
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[2] != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"samples must be (M, N, 2) with M, N >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("prediction contains non-finite values")
        object.__setattr__(self, "samples", s)
        if self.origin is not None:
            object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


def stack_predictions(preds: list[PredictionSet]) -> np.ndarray:
    """Stack per-pedestrian sets into (M, n_peds, N, 2), sample index first."""
    return np.stack([p.samples for p in preds], axis=1)
