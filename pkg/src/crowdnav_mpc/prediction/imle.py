"""Implicit maximum likelihood training of the sampler.

For each example K noise vectors are drawn, the closest generated future to
the ground truth is selected, and only that sample receives gradient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .history import PedestrianHistory
from .network import PredictorModel, backward, forward, history_features
from .rng import stream

log = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    learning_rate: float = 3e-3
    k_imle: int = 3
    epochs: int = 40
    batch_size: int = 64
    early_stop_patience: int = 6
    validation_fraction: float = 0.2
    optimizer: str = "adam"
    lr_decay: float = 0.95  # multiplicative, per epoch

    def __post_init__(self):
        if self.learning_rate < 0 or self.k_imle < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError(f"invalid training config: {self}")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if not 0 < self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in (0, 0.5]")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class TrainingError(RuntimeError):
    pass


def _stack(batch):
    hist = np.stack([h.positions if isinstance(h, PedestrianHistory) else np.asarray(h, float) for h, _ in batch])
    truth = np.stack([np.asarray(gt, dtype=float) for _, gt in batch])
    return hist, truth


def _draw_noise(seed: int, b: int, k: int, noise_dim: int) -> np.ndarray:
    return stream(seed, "imle").standard_normal((b, k, noise_dim))


def imle_select(model: PredictorModel, hist: np.ndarray, truth: np.ndarray, noise: np.ndarray):
    """Return per-example min-of-K MSE, argmin index, and the chosen noise.

    hist (B, N_h, 2), truth (B, N, 2), noise (B, K, noise_dim).
    """
    b, k, _ = noise.shape
    feats = np.repeat(history_features(hist), k, axis=0)
    last = np.repeat(hist[:, -1, :], k, axis=0)
    pos = forward(model, feats, noise.reshape(b * k, -1), last).reshape(b, k, model.n, 2)
    mse = np.sum((pos - truth[:, None]) ** 2, axis=-1).mean(axis=-1)
    idx = np.argmin(mse, axis=1)
    rows = np.arange(b)
    return mse[rows, idx], idx, noise[rows, idx]


def imle_loss(model: PredictorModel, history: PedestrianHistory, ground_truth, k: int, seed: int = 0):
    """Min over K draws of the mean squared step error; returns (loss, index)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    truth = np.asarray(ground_truth, dtype=float)
    if truth.shape != (model.n, 2):
        raise ValueError(f"ground truth shape {truth.shape} != ({model.n}, 2)")
    if history.n_h != model.n_h:
        raise ValueError(f"history length {history.n_h} != model n_h {model.n_h}")
    noise = _draw_noise(seed, 1, k, model.noise_dim)
    loss, idx, _ = imle_select(model, history.positions[None], truth[None], noise)
    return float(loss[0]), int(idx[0])


def loss_and_grad(model: PredictorModel, hist: np.ndarray, truth: np.ndarray, noise: np.ndarray):
    """Batch-mean IMLE loss and its exact gradient for fixed noise draws."""
    loss, _, chosen = imle_select(model, hist, truth, noise)
    pos, acts = forward(model, history_features(hist), chosen, hist[:, -1, :], cache=True)
    b = hist.shape[0]
    d_pos = 2.0 * (pos - truth) / (model.n * b)
    return float(loss.mean()), backward(model, acts, d_pos)


def batch_loss(model: PredictorModel, hist, truth, k: int, seed: int) -> float:
    noise = _draw_noise(seed, hist.shape[0], k, model.noise_dim)
    return float(imle_select(model, hist, truth, noise)[0].mean())


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    def direction(self, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return mhat / (np.sqrt(vhat) + self.eps)


def train_step(model: PredictorModel, batch, config: TrainingConfig, seed: int = 0, optimizer: Adam | None = None):
    """One gradient-descent update on a batch of (history, ground_truth) pairs.

    Without an ``optimizer`` the update is plain gradient descent. Returns the
    updated model and the batch loss evaluated before the update.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    hist, truth = _stack(batch)
    noise = _draw_noise(seed, hist.shape[0], config.k_imle, model.noise_dim)
    loss, grad = loss_and_grad(model, hist, truth, noise)
    if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise TrainingError(f"non-finite loss/gradient (loss={loss}) at seed {seed}")
    step = grad if optimizer is None else optimizer.direction(grad)
    return model.with_weights(model.weights - config.learning_rate * step), loss


@dataclass
class TrainingReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    n_params: int = 0
    n_train: int = 0
    n_val: int = 0

    @property
    def initial_val_loss(self) -> float:
        return self.val_loss[0]

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch]

    def as_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "initial_val_loss": self.initial_val_loss,
            "best_val_loss": self.best_val_loss,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "n_params": self.n_params,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "trained": self.stopped_epoch > 0,
        }


def split_dataset(hist: np.ndarray, truth: np.ndarray, validation_fraction: float, seed: int):
    n = hist.shape[0]
    n_val = int(round(n * validation_fraction))
    if n_val < 1 or n - n_val < 1:
        raise ValueError(f"dataset of {n} windows too small for validation fraction {validation_fraction}")
    perm = stream(seed, "split").permutation(n)
    val, tr = perm[:n_val], perm[n_val:]
    return (hist[tr], truth[tr]), (hist[val], truth[val])


def fit(model: PredictorModel, hist: np.ndarray, truth: np.ndarray, config: TrainingConfig, seed: int = 0):
    """Train with early stopping on the validation IMLE loss.

    Epoch 0 of the report is the untrained model; the best-validation weights
    are returned.
    """
    (htr, ttr), (hval, tval) = split_dataset(hist, truth, config.validation_fraction, seed)
    report = TrainingReport(n_params=model.n_params, n_train=len(htr), n_val=len(hval))
    val_seed = seed + 7919

    def val_loss(mdl):
        return batch_loss(mdl, hval, tval, config.k_imle, val_seed)

    report.val_loss.append(val_loss(model))
    report.train_loss.append(batch_loss(model, htr, ttr, config.k_imle, seed))
    best, best_loss, since_best = model, report.val_loss[0], 0
    opt = Adam() if config.optimizer == "adam" else None
    for epoch in range(1, config.epochs + 1):
        step_cfg = replace(config, learning_rate=config.learning_rate * config.lr_decay ** (epoch - 1))
        perm = stream(seed, "epoch", epoch).permutation(len(htr))
        losses = []
        for bi, start in enumerate(range(0, len(htr), config.batch_size)):
            idx = perm[start: start + config.batch_size]
            batch = list(zip(htr[idx], ttr[idx]))
            model, loss = train_step(model, batch, step_cfg, seed=(seed * 1_000_003 + epoch * 10_007 + bi) & 0x7FFFFFFF, optimizer=opt)
            losses.append(loss * len(idx))
        report.train_loss.append(float(sum(losses) / len(htr)))
        vl = val_loss(model)
        report.val_loss.append(vl)
        report.stopped_epoch = epoch
        log.info("epoch %d train %.5f val %.5f", epoch, report.train_loss[-1], vl)
        if vl < best_loss:
            best, best_loss, since_best = model, vl, 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= config.early_stop_patience:
                break
    return best, report
