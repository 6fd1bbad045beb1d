from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class DataValidationError(ValueError):
    """Raised for malformed manifests or input files; message names the offending line."""


@dataclass
class DatasetManifest:
    """Where the files of a dataset live and how to window it.

    ``signal`` is a CSV with a timestamp column followed by ``N * features``
    value columns (node-major). ``edges`` holds one ``src dst`` pair per line and
    ``coords`` is a CSV ``node,a,b`` with planar ``x,y`` or geographic ``lat,lon``.
    Relative paths resolve against the manifest's directory.
    """

    name: str
    signal: str
    edges: str
    coords: str
    interval: str = "1h"
    split: list[float] = field(default_factory=lambda: [4.0, 1.0, 1.0])
    metric: str = "euclidean"
    window: int = 24
    horizon: int = 24
    tau: int = 6
    features: int = 1
    targets: list[int] = field(default_factory=lambda: [0])
    sigma: float | None = None
    kappa: float | None = None
    regimes: str | None = None  # optional CSV of true regime id per step (synthetic data)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if len(self.split) != 3 or any(s <= 0 for s in self.split):
            raise DataValidationError(f"split must be three positive numbers, got {self.split}")
        total = float(sum(self.split))
        self.split = [s / total for s in self.split]
        if self.window <= 0 or self.horizon <= 0:
            raise DataValidationError("window and horizon must be positive")
        if self.tau < 1 or self.window % self.tau:
            raise DataValidationError(f"tau={self.tau} must divide window={self.window}")
        if self.metric not in ("euclidean", "haversine"):
            raise DataValidationError(f"metric must be euclidean or haversine, got {self.metric!r}")
        if self.features < 1 or not self.targets or any(not 0 <= t < self.features for t in self.targets):
            raise DataValidationError(f"targets {self.targets} invalid for {self.features} features per node")

    @property
    def history(self) -> int:
        return (self.window // self.tau) * self.tau

    def path(self, key: str) -> Path:
        p = Path(getattr(self, key))
        return p if p.is_absolute() else Path(self.base_dir) / p

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "DatasetManifest":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise DataValidationError(f"unknown manifest keys: {sorted(unknown)}")
        missing = {"name", "signal", "edges", "coords"} - set(d)
        if missing:
            raise DataValidationError(f"manifest is missing {sorted(missing)}")
        return cls(**d, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataValidationError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))
