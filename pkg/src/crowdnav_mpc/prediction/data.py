"""Trajectory data: ETH-format ingestion, synthetic crowds, and (history, future) windows."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..socialforce import Crowd, SocialForceParams
from .history import DEFAULT_DT_OBS, DEFAULT_N_H, DEFAULT_N_PRED
from .rng import stream

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class Track:
    ped_id: object
    frames: np.ndarray  # (T,) frame ids, increasing
    positions: np.ndarray  # (T, 2)


@dataclass
class EthData:
    tracks: dict
    malformed: list = field(default_factory=list)  # (line number, text)


def load_eth_format(path) -> EthData:
    """Parse whitespace-separated ``frame ped x y`` lines into per-pedestrian tracks."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = defaultdict(list)
    bad = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError
            frame, x, y = float(parts[0]), float(parts[2]), float(parts[3])
            if not np.all(np.isfinite([frame, x, y])):
                raise ValueError
            pid = float(parts[1])
            pid = int(pid) if pid.is_integer() else pid
        except ValueError:
            bad.append((lineno, line))
            continue
        rows[pid].append((frame, x, y))
    for lineno, line in bad:
        log.warning("%s:%d: malformed line %r", path, lineno, line)
    if not rows:
        raise DataError(f"{path}: no valid lines")
    tracks = {}
    for pid in sorted(rows, key=lambda p: (str(type(p)), p)):
        arr = np.array(sorted(rows[pid], key=lambda r: r[0]))
        tracks[pid] = Track(pid, arr[:, 0], arr[:, 1:3])
    return EthData(tracks, bad)


def frame_step(tracks) -> float:
    """Most common positive frame increment across all tracks."""
    diffs = np.concatenate([np.diff(t.frames) for t in tracks.values()] or [np.array([])])
    diffs = diffs[diffs > 0]
    if diffs.size == 0:
        return 1.0
    vals, counts = np.unique(diffs, return_counts=True)
    return float(vals[np.argmax(counts)])


def sliding_windows(tracks, n_h: int = DEFAULT_N_H, n: int = DEFAULT_N_PRED, step: float | None = None, stride: int = 1):
    """Cut every track into (history, future) windows of consecutive frames.

    A frame gap larger than ``step`` splits a track. Returns arrays (B, n_h, 2),
    (B, n, 2) and the list of (ped_id, start frame) keys.
    """
    step = frame_step(tracks) if step is None else step
    hist, fut, keys = [], [], []
    for t in tracks.values():
        breaks = np.nonzero(np.abs(np.diff(t.frames) - step) > 1e-6 * max(step, 1.0))[0] + 1
        for seg_idx in np.split(np.arange(len(t.frames)), breaks):
            seg = t.positions[seg_idx]
            for s in range(0, len(seg) - (n_h + n) + 1, stride):
                hist.append(seg[s: s + n_h])
                fut.append(seg[s + n_h: s + n_h + n])
                keys.append((t.ped_id, float(t.frames[seg_idx[s]])))
    if not hist:
        return np.zeros((0, n_h, 2)), np.zeros((0, n, 2)), []
    return np.array(hist), np.array(fut), keys


@dataclass
class SyntheticCrowdConfig:
    n_scenes: int = 60
    peds_per_scene: int = 8
    arena: tuple = (-6.0, 6.0, -5.0, 5.0)  # xmin, xmax, ymin, ymax
    speed_range: tuple = (0.8, 1.4)
    n_turns: int = 0  # intermediate waypoints per route
    repulsion: bool = True
    obs_noise: float = 0.03  # m, std of isotropic position noise
    dt_sim: float = 0.1
    dt_obs: float = DEFAULT_DT_OBS
    max_time: float = 30.0
    routes: list | None = None  # explicit routes override random ones (single scene)

    def __post_init__(self):
        if self.routes is None and (self.peds_per_scene < 1 or self.n_scenes < 1):
            raise DataError("synthetic crowd needs at least one pedestrian and one scene")
        if self.routes is not None and len(self.routes) == 0:
            raise DataError("synthetic crowd needs at least one pedestrian")
        if self.dt_obs < self.dt_sim or abs(self.dt_obs / self.dt_sim - round(self.dt_obs / self.dt_sim)) > 1e-9:
            raise DataError("dt_obs must be an integer multiple of dt_sim")


def _random_routes(rng, cfg: SyntheticCrowdConfig):
    xmin, xmax, ymin, ymax = cfg.arena
    routes = []
    for _ in range(cfg.peds_per_scene):
        # start on one border, finish on the opposite one so paths cross the middle
        side = rng.integers(4)
        u = rng.uniform(0.1, 0.9, size=2)
        if side == 0:
            a, b = (xmin, ymin + u[0] * (ymax - ymin)), (xmax, ymin + u[1] * (ymax - ymin))
        elif side == 1:
            a, b = (xmax, ymin + u[0] * (ymax - ymin)), (xmin, ymin + u[1] * (ymax - ymin))
        elif side == 2:
            a, b = (xmin + u[0] * (xmax - xmin), ymin), (xmin + u[1] * (xmax - xmin), ymax)
        else:
            a, b = (xmin + u[0] * (xmax - xmin), ymax), (xmin + u[1] * (xmax - xmin), ymin)
        a, b = np.array(a), np.array(b)
        mids = [a + (b - a) * f + rng.normal(0.0, 1.5, size=2)
                for f in np.sort(rng.uniform(0.25, 0.75, size=cfg.n_turns))]
        routes.append(np.vstack([a, *mids, b]))
    return routes


def simulate_tracks(routes, speeds, cfg: SyntheticCrowdConfig, rng=None) -> list[np.ndarray]:
    """Run one scene and return observed tracks, each (T_i, 2), sampled at dt_obs.

    Recording for a pedestrian stops once it is within one observation step of
    its final waypoint, so tracks contain walking motion only.
    """
    crowd = Crowd.from_routes(routes, speeds)
    params = SocialForceParams() if cfg.repulsion else None
    every = int(round(cfg.dt_obs / cfg.dt_sim))
    p = len(routes)
    tracks = [[crowd.positions[i].copy()] for i in range(p)]
    open_ = np.ones(p, dtype=bool)
    n_steps = int(round(cfg.max_time / cfg.dt_sim))
    for k in range(1, n_steps + 1):
        crowd.step(cfg.dt_sim, None, params)
        if k % every:
            continue
        for i in range(p):
            if not open_[i]:
                continue
            if np.linalg.norm(crowd.positions[i] - crowd.routes[i][-1]) < crowd.speeds[i] * cfg.dt_obs + 1e-9:
                open_[i] = False
                continue
            tracks[i].append(crowd.positions[i].copy())
        if not open_.any():
            break
    out = []
    for tr in tracks:
        arr = np.array(tr)
        if cfg.obs_noise > 0 and rng is not None:
            arr = arr + rng.normal(0.0, cfg.obs_noise, size=arr.shape)
        out.append(arr)
    return out


@dataclass
class SyntheticDataset:
    hist: np.ndarray  # (B, n_h, 2)
    future: np.ndarray  # (B, n, 2)
    tracks: list  # list of (T, 2) arrays
    dt_obs: float

    def __len__(self):
        return self.hist.shape[0]


def generate_synthetic_crowd(cfg: SyntheticCrowdConfig | None = None, seed: int = 0, n_h: int = DEFAULT_N_H,
                             n: int = DEFAULT_N_PRED) -> SyntheticDataset:
    cfg = cfg or SyntheticCrowdConfig()
    all_tracks = []
    scenes = 1 if cfg.routes is not None else cfg.n_scenes
    for s in range(scenes):
        rng = stream(seed, "scene", s)
        if cfg.routes is not None:
            routes = [np.asarray(r, dtype=float) for r in cfg.routes]
        else:
            routes = _random_routes(rng, cfg)
        speeds = rng.uniform(*cfg.speed_range, size=len(routes))
        all_tracks.extend(simulate_tracks(routes, speeds, cfg, rng))
    tracks = {i: Track(i, np.arange(len(t), dtype=float), t) for i, t in enumerate(all_tracks)}
    hist, fut, _ = sliding_windows(tracks, n_h, n, step=1.0)
    return SyntheticDataset(hist, fut, all_tracks, cfg.dt_obs)
