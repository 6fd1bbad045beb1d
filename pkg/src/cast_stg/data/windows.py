"""Chronological splits, train-only normalisation and sliding (X, Y) windows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..edge_features import EdgeFeatureConfig, default_bandwidth, edge_signals, static_edge_weights
from ..topology import STGraph
from .loading import Dataset
from .manifest import DataValidationError, DatasetManifest

SPLITS = ("train", "val", "test")


def split_boundaries(length: int, ratios) -> tuple[int, int, int]:
    """Chronological cut points ``(end_train, end_val, end_test)`` by floored cumulative ratio."""
    r = np.asarray(ratios, dtype=np.float64)
    r = r / r.sum()
    b1 = int(np.floor(length * r[0] + 1e-9))
    b2 = int(np.floor(length * (r[0] + r[1]) + 1e-9))
    return b1, b2, length


@dataclass
class Normalizer:
    """Per node/feature z-score for node signals plus per-column scaling of edge signals."""

    mean: np.ndarray       # (N, D)
    std: np.ndarray        # (N, D)
    edge_mean: np.ndarray  # (F',)
    edge_std: np.ndarray   # (F',)

    @classmethod
    def fit(cls, train_series: np.ndarray) -> "Normalizer":
        mean = train_series.mean(axis=0)
        std = train_series.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std, np.zeros(0), np.ones(0))

    def fit_edges(self, edge: np.ndarray) -> None:
        flat = edge.reshape(-1, edge.shape[-1])
        self.edge_mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        self.edge_std = np.where(std > 0, std, 1.0)

    def transform(self, series: np.ndarray) -> np.ndarray:
        return (series - self.mean) / self.std

    def inverse(self, values: np.ndarray, features=None) -> np.ndarray:
        """Undo :meth:`transform` on arrays whose trailing axes are (N, D) or (N, len(features))."""
        mean, std = (self.mean, self.std) if features is None else \
            (self.mean[:, features], self.std[:, features])
        return values * std + mean

    def transform_edges(self, edge: np.ndarray) -> np.ndarray:
        return (edge - self.edge_mean) / self.edge_std

    def arrays(self) -> dict[str, np.ndarray]:
        return {"mean": self.mean, "std": self.std, "edge_mean": self.edge_mean, "edge_std": self.edge_std}


@dataclass
class WindowBatch:
    x: np.ndarray            # (B, T, N, D) normalised inputs
    y: np.ndarray            # (B, S, N, D') normalised targets
    edge: np.ndarray         # (B, M, F') raw edge signals
    starts: np.ndarray       # (B,) index of the first input step
    regimes: np.ndarray | None = None  # (B,) true regime of the input window, -1 if mixed

    def __len__(self) -> int:
        return len(self.starts)

    def subset(self, idx) -> "WindowBatch":
        idx = np.asarray(idx)
        return WindowBatch(self.x[idx], self.y[idx], self.edge[idx], self.starts[idx],
                           None if self.regimes is None else self.regimes[idx])


def window_starts(begin: int, end: int, window: int, horizon: int, history: int) -> np.ndarray:
    """Start indices ``s`` with ``[s, s + T + S)`` inside ``[begin, end)`` and ``s >= history``."""
    first = max(begin, history)
    last = end - window - horizon
    return np.arange(first, last + 1) if last >= first else np.arange(0)


def minimum_length(manifest: DatasetManifest) -> int:
    """Shortest series for which every split yields at least one window."""
    need = manifest.window + manifest.horizon
    n = need + manifest.history
    while True:
        b1, b2, b3 = split_boundaries(n, manifest.split)
        if b1 - max(0, manifest.history) >= need and b2 - b1 >= need and b3 - b2 >= need:
            return n
        n += 1


@dataclass
class ForecastData:
    """Windows for every split, normalised with train-only statistics."""

    graph: STGraph
    normalizer: Normalizer
    edge_config: EdgeFeatureConfig
    splits: dict[str, WindowBatch]
    boundaries: tuple[int, int, int]
    targets: list[int]
    timestamps: np.ndarray | None = None

    def __getitem__(self, split: str) -> WindowBatch:
        return self.splits[split]

    def model_edges(self, batch: WindowBatch) -> np.ndarray:
        return self.normalizer.transform_edges(batch.edge)


def make_windows(dataset: Dataset, manifest: DatasetManifest) -> ForecastData:
    """Build train/val/test windows.

    The first ``history`` steps are reserved for the longest DTW lag; windows never
    straddle a split boundary; statistics come from the training split only.
    """
    series = dataset.series
    L = len(series)
    need = minimum_length(manifest)
    if L < need:
        raise DataValidationError(f"series has {L} steps; at least {need} are required "
                                  f"for T={manifest.window}, S={manifest.horizon}, tau={manifest.tau}")
    b1, b2, b3 = split_boundaries(L, manifest.split)
    norm = Normalizer.fit(series[:b1])
    z = norm.transform(series)
    g = dataset.graph
    if manifest.sigma is not None and manifest.kappa is not None:
        sigma, kappa = manifest.sigma, manifest.kappa
    else:
        sigma, kappa = default_bandwidth(g.coords, manifest.metric)
        sigma = manifest.sigma or sigma
        kappa = manifest.kappa or kappa
    cfg = EdgeFeatureConfig(sigma, kappa, manifest.tau, manifest.window, manifest.metric)
    weights = static_edge_weights(g, cfg)
    T, S, H = manifest.window, manifest.horizon, cfg.history
    primary = z[:, :, manifest.targets[0]]
    splits = {}
    for name, (lo, hi) in zip(SPLITS, ((0, b1), (b1, b2), (b2, b3))):
        starts = window_starts(lo, hi, T, S, H)
        x = np.stack([z[s:s + T] for s in starts])
        y = np.stack([z[s + T:s + T + S][:, :, manifest.targets] for s in starts])
        hist = np.stack([primary[s - H:s + T] for s in starts])
        edge = edge_signals(g, hist, cfg, weights)
        regimes = None
        if dataset.regimes is not None:
            blocks = np.stack([dataset.regimes[s:s + T] for s in starts])
            regimes = np.where((blocks == blocks[:, :1]).all(axis=1), blocks[:, 0], -1)
        splits[name] = WindowBatch(x, y, edge, starts, regimes)
    norm.fit_edges(splits["train"].edge)
    return ForecastData(g, norm, cfg, splits, (b1, b2, b3), list(manifest.targets), dataset.timestamps)
