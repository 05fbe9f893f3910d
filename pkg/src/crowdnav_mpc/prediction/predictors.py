"""Pluggable predictor contract used by the closed-loop runner."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .cv import DEFAULT_SIGMA_V, predict_cv, predict_cv_sampled
from .history import PedestrianHistory, PredictionSet
from .network import PredictorModel, predict_learned_many


class Predictor(Protocol):
    name: str

    def predict(self, histories: list[PedestrianHistory], n: int, cycle: int) -> list[PredictionSet]:
        ...


@dataclass
class CvPredictor:
    """Constant velocity; sigma_v = 0 collapses to the single deterministic future."""

    m: int = 20
    sigma_v: float = DEFAULT_SIGMA_V
    seed: int = 0
    name: str = "cv"

    def predict(self, histories, n, cycle):
        if self.sigma_v == 0 or self.m < 2:
            return [predict_cv(h, n) for h in histories]
        return [predict_cv_sampled(h, n, self.m, self.sigma_v, self.seed, cycle) for h in histories]


@dataclass
class LearnedPredictor:
    model: PredictorModel
    seed: int = 0
    name: str = "learned"

    def predict(self, histories, n, cycle):
        if n != self.model.n:
            raise ValueError(f"model predicts {self.model.n} steps, {n} requested")
        return predict_learned_many(self.model, histories, self.seed, cycle)
