"""Open-loop prediction scores: ADE, FDE, AMD and AMV.

Sample sets use the full-set convention: displacement errors are averaged over
all M samples rather than taking the best one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

AMD_EPSILON = 1e-6


@dataclass
class OpenLoopScores:
    ade: float
    fde: float
    amd: float
    amv: float

    def as_dict(self) -> dict:
        return asdict(self)


def _samples(pred) -> np.ndarray:
    arr = getattr(pred, "samples", pred)
    arr = np.asarray(arr, dtype=float)
    return arr[None] if arr.ndim == 2 else arr


def _check(samples: np.ndarray, truth: np.ndarray):
    if samples.shape[1:] != truth.shape or truth.ndim != 2 or truth.shape[0] < 1:
        raise ValueError(f"prediction {samples.shape[1:]} and truth {truth.shape} shapes differ")


def ade(pred, truth) -> float:
    s, t = _samples(pred), np.asarray(truth, dtype=float)
    _check(s, t)
    return float(np.linalg.norm(s - t, axis=-1).mean())


def fde(pred, truth) -> float:
    s, t = _samples(pred), np.asarray(truth, dtype=float)
    _check(s, t)
    return float(np.linalg.norm(s[:, -1] - t[-1], axis=-1).mean())


def step_covariances(samples: np.ndarray) -> np.ndarray:
    """Unbiased 2x2 covariance of the M samples at every step: (N, 2, 2)."""
    m = samples.shape[0]
    if m < 2:
        raise ValueError("covariance needs at least 2 samples")
    d = samples - samples.mean(axis=0)
    return np.einsum("mti,mtj->tij", d, d) / (m - 1)


def max_eigenvalues(cov: np.ndarray) -> np.ndarray:
    a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
    return 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b ** 2)


def amd(pred, truth, epsilon: float = AMD_EPSILON) -> float:
    s, t = _samples(pred), np.asarray(truth, dtype=float)
    _check(s, t)
    cov = step_covariances(s) + epsilon * np.eye(2)
    a, b, c = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
    det = a * c - b * b
    d = s - t
    # closed-form 2x2 inverse quadratic form
    q = (c * d[..., 0] ** 2 - 2 * b * d[..., 0] * d[..., 1] + a * d[..., 1] ** 2) / det
    return float(np.sqrt(np.maximum(q, 0.0)).mean())


def amv(pred) -> float:
    s = _samples(pred)
    return float(max_eigenvalues(step_covariances(s)).mean())


def open_loop_scores(pred, truth, epsilon: float = AMD_EPSILON) -> OpenLoopScores:
    s = _samples(pred)
    if s.shape[0] < 2:
        return OpenLoopScores(ade(s, truth), fde(s, truth), float("nan"), float("nan"))
    return OpenLoopScores(ade(s, truth), fde(s, truth), amd(s, truth, epsilon), amv(s))


def improvement(si: float, cv: float, higher_is_better: bool = False) -> float:
    """Percent improvement of SI over CV, relative to CV; negative when SI is worse."""
    if higher_is_better:
        return (si - cv) / cv * 100.0
    return (cv - si) / cv * 100.0
