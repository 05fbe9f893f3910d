"""Small feedforward sampler: history displacements + noise -> future increments.

Weights live in one flat vector. Layer ``l`` stores its (out, in) matrix
row-major followed by its bias, which is also the on-disk order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .history import DEFAULT_N_H, DEFAULT_N_PRED, PedestrianHistory, PredictionSet
from .rng import stream

MODEL_FORMAT = "crowdnav-mpc/imle-mlp"
MODEL_VERSION = 1
MAX_PARAMS = 50_000


def param_count(layer_sizes) -> int:
    return sum((a + 1) * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass(frozen=True, eq=False)
class PredictorModel:
    weights: np.ndarray
    layer_sizes: tuple[int, ...]
    noise_dim: int
    m: int = 20
    n: int = DEFAULT_N_PRED
    n_h: int = DEFAULT_N_H
    rng_seed: int = 0
    dt_obs: float = 0.4
    _views: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        w = np.ascontiguousarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        if len(sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if sizes[0] != 2 * (self.n_h - 1) + self.noise_dim:
            raise ValueError(f"input size {sizes[0]} != 2*(n_h-1) + noise_dim = {2 * (self.n_h - 1) + self.noise_dim}")
        if sizes[-1] != 2 * self.n:
            raise ValueError(f"output size {sizes[-1]} != 2*n = {2 * self.n}")
        if w.size != param_count(sizes):
            raise ValueError(f"weight count {w.size} inconsistent with layer sizes {sizes}")
        if w.size > MAX_PARAMS:
            raise ValueError(f"{w.size} parameters exceeds the lightweight limit of {MAX_PARAMS}")
        object.__setattr__(self, "_views", _layer_views(w, sizes))

    @property
    def n_params(self) -> int:
        return self.weights.size

    def layers(self):
        return self._views

    def with_weights(self, weights) -> "PredictorModel":
        return replace(self, weights=np.array(weights, dtype=float), _views=None)


def _layer_views(w, sizes):
    views, off = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        W = w[off: off + a * b].reshape(b, a)
        off += a * b
        bias = w[off: off + b]
        off += b
        views.append((W, bias))
    return views


def init_model(hidden=(48, 48), noise_dim: int = 4, n_h: int = DEFAULT_N_H, n: int = DEFAULT_N_PRED,
               m: int = 20, seed: int = 0, dt_obs: float = 0.4) -> PredictorModel:
    sizes = (2 * (n_h - 1) + noise_dim, *hidden, 2 * n)
    rng = stream(seed, "init")
    parts = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = np.sqrt(1.0 / a)
        if i == len(sizes) - 2:
            scale *= 0.1
        parts.append((scale * rng.standard_normal((b, a))).ravel())
        parts.append(np.zeros(b))
    return PredictorModel(np.concatenate(parts), sizes, noise_dim, m, n, n_h, seed, dt_obs)


def zero_model(hidden=(8,), noise_dim: int = 2, n_h: int = DEFAULT_N_H, n: int = DEFAULT_N_PRED, m: int = 20) -> PredictorModel:
    sizes = (2 * (n_h - 1) + noise_dim, *hidden, 2 * n)
    return PredictorModel(np.zeros(param_count(sizes)), sizes, noise_dim, m, n, n_h)


def history_features(positions: np.ndarray) -> np.ndarray:
    """(..., N_h, 2) positions -> (..., 2*(N_h-1)) flattened step displacements."""
    d = np.diff(positions, axis=-2)
    return d.reshape(*d.shape[:-2], -1)


def forward(model: PredictorModel, feats: np.ndarray, noise: np.ndarray, last: np.ndarray, cache: bool = False):
    """Batched forward pass.

    feats (B, 2*(N_h-1)), noise (B, noise_dim), last (B, 2) -> positions (B, N, 2).
    """
    a = np.concatenate([feats, noise], axis=1)
    acts = [a]
    layers = model.layers()
    for i, (W, b) in enumerate(layers):
        z = a @ W.T + b
        a = np.tanh(z) if i < len(layers) - 1 else z
        acts.append(a)
    inc = a.reshape(a.shape[0], model.n, 2)
    pos = last[:, None, :] + np.cumsum(inc, axis=1)
    if cache:
        return pos, acts
    return pos


def backward(model: PredictorModel, acts: list, d_pos: np.ndarray) -> np.ndarray:
    """Gradient of a scalar w.r.t. the flat weights given dL/dpositions (B, N, 2)."""
    # positions are a cumulative sum of increments: reverse cumsum routes the gradient back
    d_inc = np.cumsum(d_pos[:, ::-1, :], axis=1)[:, ::-1, :]
    delta = d_inc.reshape(d_inc.shape[0], -1)
    layers = model.layers()
    grads = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = acts[i]
        grads.append((delta.sum(axis=0), delta.T @ a_in))
        if i > 0:
            delta = (delta @ W) * (1.0 - a_in ** 2)
    flat = []
    for gb, gW in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return np.concatenate(flat)


def si_forward(model: PredictorModel, history: PedestrianHistory, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float).reshape(-1)
    if noise.size != model.noise_dim:
        raise ValueError(f"noise length {noise.size} != noise_dim {model.noise_dim}")
    if history.n_h != model.n_h:
        raise ValueError(f"history length {history.n_h} != model n_h {model.n_h}")
    feats = history_features(history.positions)[None]
    return forward(model, feats, noise[None], history.last[None])[0]


def predict_learned(model: PredictorModel, history: PedestrianHistory, seed: int | None = None,
                    cycle: int = 0) -> PredictionSet:
    if history.n_h != model.n_h:
        raise ValueError(f"history length {history.n_h} != model n_h {model.n_h}")
    seed = model.rng_seed if seed is None else seed
    noise = stream(seed, "learned", history.ped_id, cycle).standard_normal((model.m, model.noise_dim))
    feats = np.repeat(history_features(history.positions)[None], model.m, axis=0)
    last = np.repeat(history.last[None], model.m, axis=0)
    pos = forward(model, feats, noise, last)
    return PredictionSet(pos, history.dt_obs, history.ped_id, history.last)


def predict_learned_many(model: PredictorModel, histories, seed: int | None = None, cycle: int = 0) -> list[PredictionSet]:
    """All pedestrians in one matrix product; same draws as per-pedestrian calls."""
    if not histories:
        return []
    seed = model.rng_seed if seed is None else seed
    noise = np.concatenate([stream(seed, "learned", h.ped_id, cycle).standard_normal((model.m, model.noise_dim))
                            for h in histories])
    feats = np.concatenate([np.repeat(history_features(h.positions)[None], model.m, axis=0) for h in histories])
    last = np.concatenate([np.repeat(h.last[None], model.m, axis=0) for h in histories])
    pos = forward(model, feats, noise, last).reshape(len(histories), model.m, model.n, 2)
    return [PredictionSet(pos[i], h.dt_obs, h.ped_id, h.last) for i, h in enumerate(histories)]


def save_model(model: PredictorModel, path) -> None:
    # json writes floats via repr, which round-trips exactly
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "noise_dim": model.noise_dim,
        "n_h": model.n_h,
        "n": model.n,
        "m": model.m,
        "rng_seed": model.rng_seed,
        "dt_obs": model.dt_obs,
        "weights": [float(w) for w in model.weights],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> PredictorModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    return PredictorModel(np.array(doc["weights"], dtype=float), tuple(doc["layer_sizes"]), doc["noise_dim"],
                          doc["m"], doc["n"], doc["n_h"], doc["rng_seed"], doc["dt_obs"])
