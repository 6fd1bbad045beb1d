"""Reading signal CSVs, coordinate files and edge lists into arrays and a graph."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from ..topology import GraphError, STGraph
from .manifest import DataValidationError, DatasetManifest

MISSING = {"", "nan", "NaN", "NA", "null", "None"}


@dataclass
class Dataset:
    series: np.ndarray          # (L, N, D), gaps interpolated
    timestamps: np.ndarray      # (L,) datetime64[s]
    graph: STGraph
    regimes: np.ndarray | None = None   # (L,) true regime id, synthetic data only


def interpolate_missing(values: np.ndarray) -> np.ndarray:
    """Linear interpolation along axis 0 per column; edges hold the nearest valid value."""
    out = np.array(values, dtype=np.float64)
    flat = out.reshape(out.shape[0], -1)
    t = np.arange(flat.shape[0])
    for c in range(flat.shape[1]):
        col = flat[:, c]
        bad = np.isnan(col)
        if bad.all():
            raise DataValidationError(f"column {c} has no observed values")
        if bad.any():
            col[bad] = np.interp(t[bad], t[~bad], col[~bad])
    return out


def read_signal(path: Path, features: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Parse the signal CSV into ``(timestamps, values)`` with values shaped (L, N, D)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataValidationError(f"{path}: needs a header and at least one data row")
    width = len(rows[0])
    if width < 2:
        raise DataValidationError(f"{path}:1: header needs a timestamp and at least one value column")
    if (width - 1) % features:
        raise DataValidationError(f"{path}:1: {width - 1} value columns not divisible by {features} features")
    stamps, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise DataValidationError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
        try:
            stamps.append(np.datetime64(datetime.fromisoformat(row[0].strip()), "s"))
        except ValueError:
            raise DataValidationError(f"{path}:{lineno}: unparseable timestamp {row[0]!r}") from None
        vals = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell in MISSING:
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataValidationError(f"{path}:{lineno}: bad numeric value {cell!r}") from None
        values.append(vals)
    ts = np.array(stamps)
    if len(ts) > 1 and np.any(np.diff(ts) <= np.timedelta64(0, "s")):
        bad = int(np.argmax(np.diff(ts) <= np.timedelta64(0, "s"))) + 3
        raise DataValidationError(f"{path}:{bad}: timestamps must be strictly increasing")
    arr = np.array(values, dtype=np.float64)
    n_nodes = (width - 1) // features
    return ts, arr.reshape(len(arr), n_nodes, features)


def read_edges(path: Path) -> list[tuple[int, int]]:
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise DataValidationError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataValidationError(f"{path}:{lineno}: node ids must be integers") from None
    return edges


def read_coords(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    coords = {}
    for lineno, row in enumerate(rows, start=1):
        if not row or (lineno == 1 and not row[0].strip().lstrip("-").isdigit()):
            continue
        if len(row) != 3:
            raise DataValidationError(f"{path}:{lineno}: expected 'node,a,b'")
        try:
            coords[int(row[0])] = (float(row[1]), float(row[2]))
        except ValueError:
            raise DataValidationError(f"{path}:{lineno}: bad coordinate row {row}") from None
    n = len(coords)
    if sorted(coords) != list(range(n)):
        raise DataValidationError(f"{path}: node ids must be 0..{n - 1}")
    return np.array([coords[i] for i in range(n)])


def read_regimes(path: Path, length: int) -> np.ndarray:
    labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if labels.shape != (length,):
        raise DataValidationError(f"{path}: {labels.size} regime labels for {length} steps")
    return labels


def load_dataset(manifest: DatasetManifest) -> Dataset:
    try:
        ts, raw = read_signal(manifest.path("signal"), manifest.features)
        coords = read_coords(manifest.path("coords"))
        edges = read_edges(manifest.path("edges"))
    except OSError as exc:
        raise DataValidationError(f"cannot read dataset file: {exc}") from exc
    n = raw.shape[1]
    if len(coords) != n:
        raise DataValidationError(f"signal has {n} nodes but {len(coords)} coordinates were given")
    try:
        graph = STGraph(n, tuple(edges), coords)
    except GraphError as exc:
        raise DataValidationError(str(exc)) from exc
    try:
        regimes = read_regimes(manifest.path("regimes"), len(ts)) if manifest.regimes else None
    except (OSError, ValueError) as exc:
        if isinstance(exc, DataValidationError):
            raise
        raise DataValidationError(f"cannot read regime labels: {exc}") from exc
    return Dataset(interpolate_missing(raw), ts, graph, regimes)
