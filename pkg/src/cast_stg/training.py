"""Losses, the optimisation loop and MAE/RMSE evaluation."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .autodiff.optim import Adam
from .autodiff.tensor import Tensor, as_tensor, backward, no_grad
from .codebook import codebook_loss
from .data.windows import ForecastData, Normalizer, WindowBatch
from .model import CaST, ForwardResult, ModelConfig

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class TrainingDiverged(FloatingPointError):
    pass


def prediction_loss(y_hat, y) -> Tensor:
    """Mean absolute error; the Laplace negative log-likelihood up to a constant."""
    y_hat, y = as_tensor(y_hat), as_tensor(y)
    if y_hat.shape != y.shape:
        raise ValueError(f"prediction shape {y_hat.shape} != target shape {y.shape}")
    return ops.mean(ops.abs(y_hat - y))


def mi_loss(z: np.ndarray, z_hat) -> Tensor:
    """``mean_nodes sum_k z_k log(z_hat_k)`` with ``z_hat`` floored at 1e-12.

    No leading minus: minimising it pushes the classifier's probability for the
    true environment down.
    """
    logp = ops.log(ops.clamp(as_tensor(z_hat), PROB_FLOOR, None))
    return ops.mean(ops.sum(logp * Tensor(z), axis=-1))


def cross_entropy(z: np.ndarray, z_hat) -> Tensor:
    return -mi_loss(z, z_hat)


@dataclass
class LossBreakdown:
    pre: float
    cod: float
    mi: float
    total: float
    classifier: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {"L_pre": self.pre, "L_cod": self.cod, "L_mi": self.mi, "total": self.total,
                "classifier_ce": self.classifier}


def total_loss(model: CaST, result: ForwardResult, y, config: ModelConfig):
    """Combine the three loss terms.

    Returns ``(objective, breakdown)``.  ``objective`` is what gets differentiated:
    the total loss plus, under the adversarial scheme, a cross-entropy that trains
    the classifier on detached surrogate features.
    """
    z = result.assignment.z
    l_pre = prediction_loss(result.y_hat, y)
    l_cod, _, _ = codebook_loss(result.internals["H_e"], result.assignment.index, model.codebook,
                                config.alpha)
    l_mi = mi_loss(z, result.z_hat)
    total = l_pre + l_cod + l_mi * config.beta
    objective = total
    cls = 0.0
    if config.mi_mode == "adversarial":
        ce = cross_entropy(z, model.classify(ops.stop_gradient(result.internals["H_i_hat"])))
        objective = objective + ce
        cls = ce.item()
    breakdown = LossBreakdown(l_pre.item(), l_cod.item(), l_mi.item(), total.item(), cls)
    return objective, breakdown


# -- metrics -----------------------------------------------------------------------

def mae(y_hat: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(y_hat) - np.asarray(y))))


def rmse(y_hat: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(y_hat) - np.asarray(y)) ** 2)))


def horizon_groups(horizon: int, groups: int = 3) -> list[tuple[int, int]]:
    """Split 1..S into ``groups`` contiguous ranges (1-8, 9-16, 17-24 for S=24)."""
    edges = np.linspace(0, horizon, groups + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def predict_batches(model: CaST, batch: WindowBatch, normalizer: Normalizer, mode: str = "test",
                    chunk: int = 256) -> np.ndarray:
    out = []
    with no_grad():
        for lo in range(0, len(batch), chunk):
            part = batch.subset(np.arange(lo, min(len(batch), lo + chunk)))
            out.append(model.forward(part.x, normalizer.transform_edges(part.edge), mode).y_hat.data)
    return np.concatenate(out) if out else np.zeros((0,) + batch.y.shape[1:])


def evaluate(model: CaST, data: ForecastData, split: str = "test", mode: str = "test") -> dict:
    """MAE and RMSE in original units, overall and per horizon group."""
    batch = data[split]
    norm = data.normalizer
    pred = norm.inverse(predict_batches(model, batch, norm, mode), data.targets)
    true = norm.inverse(batch.y, data.targets)
    report = {"split": split, "windows": int(len(batch)), "mae": mae(pred, true), "rmse": rmse(pred, true),
              "horizons": []}
    for a, b in horizon_groups(true.shape[1]):
        report["horizons"].append({"steps": f"{a + 1}-{b}", "mae": mae(pred[:, a:b], true[:, a:b]),
                                   "rmse": rmse(pred[:, a:b], true[:, a:b])})
    return report


# -- optimisation ----------------------------------------------------------------

@dataclass
class TrainResult:
    model: CaST
    optimizer: Adam
    history: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mae: float = float("inf")


class Trainer:
    def __init__(self, model: CaST, config: ModelConfig | None = None):
        self.model = model
        self.config = config or model.config
        self.optimizer = Adam(model.named_parameters(), lr=self.config.lr)
        self.step_losses: list[float] = []

    def train_step(self, x: np.ndarray, edge: np.ndarray, y: np.ndarray) -> LossBreakdown:
        self.optimizer.zero_grad()
        result = self.model.forward(x, edge, "train")
        objective, parts = total_loss(self.model, result, y, self.config)
        if not np.isfinite(parts.total):
            raise TrainingDiverged(f"non-finite loss at step {len(self.step_losses)}")
        backward(objective)
        self.optimizer.step()
        self.step_losses.append(parts.total)
        return parts

    def fit(self, data: ForecastData, epochs: int | None = None, max_steps: int | None = None,
            validate: bool = True) -> TrainResult:
        cfg = self.config
        epochs = cfg.epochs if epochs is None else epochs
        rng = np.random.default_rng(cfg.seed)
        train = data["train"]
        norm = data.normalizer
        edge_all = norm.transform_edges(train.edge)
        result = TrainResult(self.model, self.optimizer)
        best_state = None
        stale = 0
        for epoch in range(epochs):
            order = rng.permutation(len(train))
            sums = np.zeros(5)
            n_batches = 0
            for b, lo in enumerate(range(0, len(order), cfg.batch_size)):
                idx = order[lo:lo + cfg.batch_size]
                try:
                    parts = self.train_step(train.x[idx], edge_all[idx], train.y[idx])
                except TrainingDiverged as exc:
                    raise TrainingDiverged(f"epoch {epoch}, batch {b}: {exc}") from exc
                sums += [parts.pre, parts.cod, parts.mi, parts.total, parts.classifier]
                n_batches += 1
                if max_steps is not None and len(self.step_losses) >= max_steps:
                    break
            means = sums / max(n_batches, 1)
            entry = {"epoch": epoch,
                     "train_loss": dict(zip(("L_pre", "L_cod", "L_mi", "total", "classifier_ce"),
                                            map(float, means)))}
            if validate and len(data["val"]):
                val = evaluate(self.model, data, "val")
                entry["val_mae"], entry["val_rmse"] = val["mae"], val["rmse"]
                if val["mae"] < result.best_val_mae:
                    result.best_val_mae, result.best_epoch = val["mae"], epoch
                    best_state = (self.model.state_dict(), copy.deepcopy(self.optimizer.state),
                                  self.model.codebook.usage.copy())
                    stale = 0
                else:
                    stale += 1
            result.history.append(entry)
            log.info("epoch %d: %s", epoch, entry)
            if max_steps is not None and len(self.step_losses) >= max_steps:
                break
            if validate and stale >= cfg.patience:
                break
        if best_state is not None:
            state, opt_state, usage = best_state
            self.model.load_state_dict(state)
            self.optimizer.state = opt_state
            self.model.codebook.usage[:] = usage
        result.step_losses = list(self.step_losses)
        return result


def config_for(data: ForecastData, **overrides) -> ModelConfig:
    """Model config whose shape fields match ``data``; other fields from ``overrides``."""
    batch = data["train"]
    shape = {"window": batch.x.shape[1], "horizon": batch.y.shape[1], "in_dim": batch.x.shape[-1],
             "out_dim": batch.y.shape[-1], "edge_features": batch.edge.shape[-1]}
    for key, value in shape.items():
        if key in overrides and overrides[key] != value:
            raise ValueError(f"config sets {key}={overrides[key]} but the data has {value}")
    return ModelConfig.from_dict({**overrides, **shape})


def train(data: ForecastData, config: ModelConfig, **kwargs) -> TrainResult:
    """Build a fresh model for ``data`` and fit it; the best-validation weights are kept."""
    model = CaST(data.graph, config)
    return Trainer(model, config).fit(data, **kwargs)
