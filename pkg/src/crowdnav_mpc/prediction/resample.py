from __future__ import annotations

import numpy as np

from .history import PredictionSet


def resample_to_grid(pred: PredictionSet, dt_target: float, n_target: int, origin=None) -> PredictionSet:
    """Linearly re-time every sample onto ``k * dt_target`` for k = 1..n_target.

    Time 0 is the pedestrian's current position (``origin``, defaulting to the
    prediction's own origin). Past the last predicted step the final point is held.
    """
    if pred.samples.size == 0:
        raise ValueError("empty prediction")
    if dt_target <= 0 or n_target < 1:
        raise ValueError("dt_target must be positive and n_target >= 1")
    origin = pred.origin if origin is None else np.asarray(origin, dtype=float)
    if origin is None:
        raise ValueError("resampling needs the current position (origin)")
    m, n, _ = pred.samples.shape
    src = np.concatenate([np.broadcast_to(origin, (m, 1, 2)), pred.samples], axis=1)

    s = np.arange(1, n_target + 1) * (dt_target / pred.dt_pred)
    near = np.round(s)
    s = np.where(np.abs(s - near) < 1e-9, near, s)
    s = np.minimum(s, n)
    lo = np.floor(s).astype(int)
    hi = np.minimum(lo + 1, n)
    w = (s - lo)[None, :, None]
    out = src[:, lo] + w * (src[:, hi] - src[:, lo])
    exact = w[0, :, 0] == 0.0
    out[:, exact] = src[:, lo[exact]]
    return PredictionSet(out, dt_target, pred.ped_id, origin)
