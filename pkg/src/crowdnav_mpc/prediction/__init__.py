from .cv import predict_cv, predict_cv_sampled
from .data import (DataError, SyntheticCrowdConfig, SyntheticDataset, generate_synthetic_crowd, load_eth_format,
                   sliding_windows)
from .history import PedestrianHistory, PredictionSet, pad_history, stack_predictions
from .imle import TrainingConfig, TrainingError, fit, imle_loss, train_step
from .network import (PredictorModel, init_model, load_model, predict_learned, predict_learned_many, save_model,
                      si_forward, zero_model)
from .predictors import CvPredictor, LearnedPredictor, Predictor
from .resample import resample_to_grid

__all__ = [
    "CvPredictor", "LearnedPredictor", "Predictor", "DataError", "PedestrianHistory", "PredictionSet", "PredictorModel", "SyntheticCrowdConfig", "SyntheticDataset",
    "TrainingConfig", "TrainingError", "fit", "generate_synthetic_crowd", "imle_loss", "init_model", "load_eth_format",
    "load_model", "pad_history", "predict_cv", "predict_cv_sampled", "predict_learned", "predict_learned_many",
    "resample_to_grid", "save_model", "si_forward", "sliding_windows", "stack_predictions", "train_step", "zero_model",
]
