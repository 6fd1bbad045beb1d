"""Per-edge features: thresholded Gaussian proximity, Pearson correlation and
time-delayed DTW distances between a source window and lagged target windows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import STGraph

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class EdgeFeatureConfig:
    sigma: float
    kappa: float
    tau: int = 6
    window: int = 24
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.tau < 1 or self.window % self.tau:
            raise ValueError(f"tau={self.tau} must be >= 1 and divide the window length {self.window}")
        if self.metric not in ("euclidean", "haversine"):
            raise ValueError(f"unknown distance metric {self.metric!r}")

    @property
    def num_lags(self) -> int:
        return self.window // self.tau

    @property
    def history(self) -> int:
        """Steps of history needed before a window for the largest lag."""
        return self.num_lags * self.tau

    @property
    def num_features(self) -> int:
        return 2 + self.num_lags


def pairwise_distances(coords: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if metric == "euclidean":
        diff = coords[:, None, :] - coords[None, :, :]
        return np.sqrt((diff ** 2).sum(-1))
    if metric == "haversine":
        lat, lon = np.radians(coords[:, 0]), np.radians(coords[:, 1])
        dlat = lat[:, None] - lat[None, :]
        dlon = lon[:, None] - lon[None, :]
        a = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
        return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    raise ValueError(f"unknown distance metric {metric!r}")


def default_bandwidth(coords: np.ndarray, metric: str = "euclidean") -> tuple[float, float]:
    """(sigma, kappa): std and 90th percentile of the off-diagonal pairwise distances."""
    d = pairwise_distances(coords, metric)
    off = d[~np.eye(len(d), dtype=bool)]
    if off.size == 0 or off.std() == 0:
        scale = float(off.max()) if off.size and off.max() > 0 else 1.0
        return scale, scale
    return float(off.std()), float(np.percentile(off, 90))


def gaussian_weight(dist: float, cfg: EdgeFeatureConfig) -> float:
    if dist < 0:
        raise ValueError("distance must be non-negative")
    if dist > cfg.kappa:
        return 0.0
    return float(np.exp(-(dist ** 2) / cfg.sigma ** 2))


# spread below this fraction of a series' magnitude counts as constant (rounding noise only)
CONSTANT_RTOL = 1e-10


def _spread(centered: np.ndarray, raw: np.ndarray) -> np.ndarray:
    norm = np.sqrt((centered ** 2).sum(-1))
    scale = np.abs(raw).max(-1) * np.sqrt(raw.shape[-1])
    return np.where(norm > CONSTANT_RTOL * scale, norm, 0.0)


def pearson(x, y) -> float:
    """Pearson correlation; 0.0 when either series is (numerically) constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("pearson needs at least two samples")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = _spread(xc, x), _spread(yc, y)
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.clip((xc * yc).sum() / (sx * sy), -1.0, 1.0))


def _pearson_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xc = x - x.mean(-1, keepdims=True)
    yc = y - y.mean(-1, keepdims=True)
    sx = _spread(xc, x)
    sy = _spread(yc, y)
    num = (xc * yc).sum(-1)
    ok = (sx > 0) & (sy > 0)
    out = np.zeros_like(num)
    out[ok] = num[ok] / (sx[ok] * sy[ok])
    return np.clip(out, -1.0, 1.0)


def dtw(a, b) -> float:
    """Unconstrained DTW with absolute-difference cost, aligning both endpoints."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw needs non-empty series")
    n, m = a.size, b.size
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = abs(a[i - 1] - b[j - 1])
            acc[i, j] = cost + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    return float(acc[n, m])


def dtw_batch(a: np.ndarray, b: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """DTW for many pairs at once: ``a`` is (P, n), ``b`` is (P, m); returns (P,)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"dtw_batch expects (P, n) and (P, m), got {a.shape} and {b.shape}")
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise ValueError("dtw needs non-empty series")
    out = np.empty(a.shape[0])
    for lo in range(0, a.shape[0], chunk):
        aa, bb = a[lo:lo + chunk], b[lo:lo + chunk]
        p, n, m = aa.shape[0], aa.shape[1], bb.shape[1]
        prev = np.full((p, m + 1), np.inf)
        prev[:, 0] = 0.0
        for i in range(n):
            cost = np.abs(aa[:, i, None] - bb)
            cur = np.empty((p, m + 1))
            cur[:, 0] = np.inf
            diag_up = np.minimum(prev[:, :-1], prev[:, 1:])
            for j in range(m):
                cur[:, j + 1] = cost[:, j] + np.minimum(diag_up[:, j], cur[:, j])
            prev = cur
        out[lo:lo + chunk] = prev[:, m]
    return out


def time_delay_dtw(x_i, x_j, cfg: EdgeFeatureConfig) -> np.ndarray:
    """DTW between the source window and the target series lagged by ``alpha * tau``.

    Args:
        x_i: source window, length ``cfg.window``.
        x_j: target series covering the same window plus ``cfg.history`` earlier
            steps (length ``cfg.window + cfg.history``), oldest first.

    Returns:
        Vector of length ``window / tau``; entry ``alpha - 1`` uses lag ``alpha * tau``.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    T = cfg.window
    if x_i.size != T:
        raise ValueError(f"source window has length {x_i.size}, expected {T}")
    if x_j.size < T + cfg.history:
        raise ValueError(f"target needs {T + cfg.history} steps of history+window, got {x_j.size}")
    end = x_j.size
    targets = np.stack([x_j[end - a * cfg.tau - T: end - a * cfg.tau]
                        for a in range(1, cfg.num_lags + 1)])
    return dtw_batch(np.broadcast_to(x_i, targets.shape), targets)


def static_edge_weights(g: STGraph, cfg: EdgeFeatureConfig) -> np.ndarray:
    if g.coords is None:
        raise ValueError("graph has no coordinates; Gaussian edge weights need them")
    d = pairwise_distances(g.coords, cfg.metric)
    return np.array([gaussian_weight(d[s, t], cfg) for s, t in g.edges])


def assemble_edge_signal(g: STGraph, window: np.ndarray, cfg: EdgeFeatureConfig,
                         weights: np.ndarray | None = None) -> np.ndarray:
    """Edge signal rows ``[W, rho, R^1..R^A]`` for one window.

    Args:
        window: (history + T, N) node series, oldest first; the last T rows are
            the input window.
        weights: precomputed Gaussian weights (M,), else derived from ``g.coords``.
    """
    return edge_signals(g, np.asarray(window)[None], cfg, weights)[0]


def edge_signals(g: STGraph, windows: np.ndarray, cfg: EdgeFeatureConfig,
                 weights: np.ndarray | None = None) -> np.ndarray:
    """Vectorised :func:`assemble_edge_signal` over a stack of windows (W, history + T, N)."""
    windows = np.asarray(windows, dtype=np.float64)
    T, H = cfg.window, cfg.history
    if windows.ndim != 3 or windows.shape[1] < T + H:
        raise ValueError(f"windows must be (W, >= {T + H}, N), got {windows.shape}")
    if windows.shape[2] != g.num_nodes:
        raise ValueError(f"windows carry {windows.shape[2]} nodes, graph has {g.num_nodes}")
    windows = windows[:, -(T + H):, :]
    if weights is None:
        weights = static_edge_weights(g, cfg)
    src, dst = g.src, g.dst
    nw, M = windows.shape[0], g.num_edges
    cur = windows[:, H:, :]  # (W, T, N)
    rho = _pearson_rows(cur[:, :, src].transpose(0, 2, 1), cur[:, :, dst].transpose(0, 2, 1))
    A = cfg.num_lags
    source = cur[:, :, src].transpose(0, 2, 1)  # (W, M, T)
    lagged = np.stack([windows[:, H - a * cfg.tau: H - a * cfg.tau + T, :][:, :, dst].transpose(0, 2, 1)
                       for a in range(1, A + 1)], axis=2)  # (W, M, A, T)
    src_rep = np.broadcast_to(source[:, :, None, :], lagged.shape)
    r = dtw_batch(src_rep.reshape(-1, T), lagged.reshape(-1, T)).reshape(nw, M, A)
    out = np.empty((nw, M, 2 + A))
    out[:, :, 0] = weights[None, :]
    out[:, :, 1] = rho
    out[:, :, 2:] = r
    return out
