"""Synthetic spatio-temporal data with known temporal regimes and edge diffusion.

Each node follows a regime-dependent base process (AR(1) around a regime mean
plus a seasonal term).  On top of that, every edge ``s -> n`` adds
``c_e(t) * x_{t-1}[s]`` to node ``n``.  Regimes play the role of temporal
environments; the per-edge coefficients are the ground-truth spatial causation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..topology import STGraph
from .loading import Dataset
from .manifest import DatasetManifest


@dataclass(frozen=True)
class Regime:
    mean: float
    ar: float
    amplitude: float
    period: float


@dataclass
class SyntheticScenario:
    num_nodes: int
    edges: list[tuple[int, int]]
    coords: list[tuple[float, float]]
    length: int
    schedule: list[tuple[int, int, int]]          # (start, end, regime id), end exclusive
    regimes: dict[int, Regime]
    diffusion: list[float]                        # baseline coefficient per edge
    perturbations: list[tuple[int, int, int, float]] = field(default_factory=list)  # (edge, start, end, coef)
    noise: float = 0.1
    seed: int = 0
    split: list[float] = field(default_factory=lambda: [4.0, 1.0, 1.0])
    window: int = 24
    horizon: int = 24
    tau: int = 6
    name: str = "synthetic"

    def __post_init__(self):
        self.edges = [tuple(e) for e in self.edges]
        self.schedule = sorted(tuple(s) for s in self.schedule)
        self.regimes = {int(k): v if isinstance(v, Regime) else Regime(**v) for k, v in self.regimes.items()}
        self.perturbations = [tuple(p) for p in self.perturbations]
        if len(self.diffusion) != len(self.edges):
            raise ValueError(f"{len(self.diffusion)} diffusion coefficients for {len(self.edges)} edges")
        cursor = 0
        for start, end, rid in self.schedule:
            if start != cursor or end <= start:
                raise ValueError(f"regime schedule must tile [0, {self.length}) without gaps; broke at {start}")
            if rid not in self.regimes:
                raise ValueError(f"schedule references unknown regime {rid}")
            cursor = end
        if cursor != self.length:
            raise ValueError(f"regime schedule ends at {cursor}, series length is {self.length}")

    def without_perturbations(self) -> "SyntheticScenario":
        return replace(self, perturbations=[])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regimes"] = {str(k): asdict(v) for k, v in self.regimes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScenario":
        return cls(**d)


@dataclass
class SyntheticData:
    dataset: Dataset
    regimes: np.ndarray        # (L,) regime id per step
    coefficients: np.ndarray   # (L, M) diffusion coefficient per step and edge
    scenario: SyntheticScenario


def regime_labels(scenario: SyntheticScenario) -> np.ndarray:
    labels = np.empty(scenario.length, dtype=np.int64)
    for start, end, rid in scenario.schedule:
        labels[start:end] = rid
    return labels


def coefficient_series(scenario: SyntheticScenario) -> np.ndarray:
    coef = np.tile(np.asarray(scenario.diffusion, dtype=np.float64), (scenario.length, 1))
    for edge, start, end, value in scenario.perturbations:
        coef[start:end, edge] = value
    return coef


def synthesize_ood(scenario: SyntheticScenario) -> SyntheticData:
    rng = np.random.default_rng(scenario.seed)
    N, L = scenario.num_nodes, scenario.length
    labels = regime_labels(scenario)
    coef = coefficient_series(scenario)
    src = np.array([s for s, _ in scenario.edges], dtype=np.intp)
    dst = np.array([d for _, d in scenario.edges], dtype=np.intp)
    phase = rng.uniform(0.0, 2 * np.pi, size=N)
    shocks = rng.standard_normal((L, N)) * scenario.noise
    first = scenario.regimes[int(labels[0])]
    dev = np.zeros(N)
    x = np.zeros((L, N))
    prev = np.full(N, first.mean)
    for t in range(L):
        r = scenario.regimes[int(labels[t])]
        dev = r.ar * dev + shocks[t]
        base = r.mean + dev + r.amplitude * np.sin(2 * np.pi * t / r.period + phase)
        inflow = np.zeros(N)
        np.add.at(inflow, dst, coef[t] * prev[src])
        x[t] = base + inflow
        prev = x[t]
    start = np.datetime64("2019-01-01T00:00:00", "s")
    stamps = start + np.arange(L) * np.timedelta64(1, "h")
    graph = STGraph(N, tuple(scenario.edges), np.asarray(scenario.coords, dtype=np.float64))
    return SyntheticData(Dataset(x[:, :, None], stamps, graph, labels), labels, coef, scenario)


def _blocks(begin: int, end: int, size: int, ids: list[int], offset: int = 0):
    out, k = [], offset
    for s in range(begin, end, size):
        out.append((s, min(end, s + size), ids[k % len(ids)]))
        k += 1
    return out


def regime_shift(seed: int = 0, length: int = 1800, num_nodes: int = 6) -> SyntheticScenario:
    """Two alternating training regimes; the test third is a third, unseen regime."""
    rng = np.random.default_rng(10_000 + seed)
    coords = rng.uniform(0.0, 10.0, size=(num_nodes, 2))
    edges = [(i, (i + 1) % num_nodes) for i in range(num_nodes)]
    edges += [((i + 2) % num_nodes, i) for i in range(0, num_nodes, 2)]
    diffusion = list(np.round(rng.uniform(0.1, 0.3, size=len(edges)), 3))
    split = [4.0, 1.0, 1.0]
    b1 = int(length * 4 / 6)
    b2 = int(length * 5 / 6)
    schedule = _blocks(0, b1, 100, [0, 1]) + _blocks(b1, b2, 75, [0, 1]) + [(b2, length, 2)]
    regimes = {
        0: Regime(mean=-1.5, ar=0.8, amplitude=0.5, period=24.0),
        1: Regime(mean=1.5, ar=0.5, amplitude=1.5, period=12.0),
        2: Regime(mean=0.5, ar=0.65, amplitude=1.0, period=16.0),
    }
    return SyntheticScenario(num_nodes, edges, [tuple(c) for c in coords], length, schedule, regimes,
                             diffusion, [], noise=0.2, seed=seed, split=split, name="regime-shift")


def edge_perturb(seed: int = 0, length: int = 1500, num_nodes: int = 10,
                 perturbed_edge: int | None = None, perturbed_coef: float = 0.6) -> SyntheticScenario:
    """Bidirectional chain; one middle edge's coefficient jumps during the test third."""
    rng = np.random.default_rng(20_000 + seed)
    coords = np.stack([np.arange(num_nodes, dtype=float), rng.uniform(-0.3, 0.3, size=num_nodes)], axis=1)
    edges = []
    for i in range(num_nodes - 1):
        edges += [(i, i + 1), (i + 1, i)]
    diffusion = [0.2] * len(edges)
    if perturbed_edge is None:
        perturbed_edge = 2 * (num_nodes // 2 - 1)   # middle forward edge
    b2 = int(length * 5 / 6)
    schedule = _blocks(0, length, 150, [0, 1])
    regimes = {0: Regime(-0.5, 0.7, 1.0, 24.0), 1: Regime(0.5, 0.6, 1.0, 12.0)}
    return SyntheticScenario(num_nodes, edges, [tuple(c) for c in coords], length, schedule, regimes,
                             diffusion, [(perturbed_edge, b2, length, perturbed_coef)], noise=0.2,
                             seed=seed, name="edge-perturb")


PRESETS = {"regime-shift": regime_shift, "edge-perturb": edge_perturb}


def write_synthetic(data: SyntheticData, out_dir: str | Path) -> Path:
    """Write signal/edge/coordinate/regime files plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = data.scenario
    ds = data.dataset
    with open(out / "signal.csv", "w") as fh:
        fh.write("timestamp," + ",".join(f"node{i}" for i in range(sc.num_nodes)) + "\n")
        for t in range(sc.length):
            stamp = str(ds.timestamps[t].astype("datetime64[s]"))
            fh.write(stamp + "," + ",".join(repr(float(v)) for v in ds.series[t, :, 0]) + "\n")
    (out / "edges.txt").write_text("".join(f"{s} {d}\n" for s, d in sc.edges))
    (out / "coords.csv").write_text("node,x,y\n" + "".join(
        f"{i},{float(c[0])!r},{float(c[1])!r}\n" for i, c in enumerate(sc.coords)))
    (out / "regimes.txt").write_text("".join(f"{int(r)}\n" for r in data.regimes))
    np.savetxt(out / "coefficients.csv", data.coefficients, delimiter=",", fmt="%.17g")
    (out / "scenario.json").write_text(json.dumps(sc.to_dict(), indent=2))
    manifest = DatasetManifest(name=sc.name, signal="signal.csv", edges="edges.txt", coords="coords.csv",
                               interval="1h", split=list(sc.split), metric="euclidean",
                               window=sc.window, horizon=sc.horizon, tau=sc.tau, regimes="regimes.txt")
    path = out / "manifest.json"
    manifest.save(path)
    return path
