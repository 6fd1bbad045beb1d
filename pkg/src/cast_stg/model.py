"""The full forecaster: disentangle, quantise the environment, deconfound the
entity through the edge graph, then predict from the concatenation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .autodiff import ops
from .autodiff.nn import MLP, Module
from .autodiff.tensor import ShapeError, Tensor, as_tensor, no_grad
from .codebook import Codebook, EnvAssignment
from .deconfounder import Deconfounder
from .disentangler import Disentangler
from .topology import STGraph


@dataclass
class ModelConfig:
    hidden: int = 16              # F
    codebook_size: int = 5        # K
    laguerre_order: int = 3       # U
    gcn_depth: int = 2            # K_b
    max_kernel_exp: int = 3       # S_k
    pos_dim: int = 5              # D_p
    backbone_layers: int = 2
    alpha: float = 0.5
    beta: float = 0.1
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    soft_temperature: float = 1.0
    seed: int = 0
    window: int = 24              # T
    horizon: int = 24             # S
    in_dim: int = 1               # D
    out_dim: int = 1              # D'
    edge_features: int = 6        # F'
    laplacian_scale: float = 1.0
    use_env: bool = True
    mi_mode: str = "adversarial"  # or "joint"
    identical_codebook_init: bool = False
    patience: int = 10

    def __post_init__(self):
        ints = ("hidden", "codebook_size", "laguerre_order", "gcn_depth", "pos_dim",
                "backbone_layers", "batch_size", "window", "horizon", "in_dim", "out_dim",
                "edge_features")
        for name in ints:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_kernel_exp < 0 or 2 ** self.max_kernel_exp > self.window:
            raise ValueError(f"max_kernel_exp={self.max_kernel_exp} incompatible with window {self.window}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.soft_temperature > 0 or not self.lr > 0:
            raise ValueError("soft_temperature and lr must be positive")
        if self.mi_mode not in ("adversarial", "joint"):
            raise ValueError(f"mi_mode must be 'adversarial' or 'joint', got {self.mi_mode!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ForwardResult:
    y_hat: Tensor                  # (B, S, N, D')
    assignment: EnvAssignment      # z, (B, N, K)
    z_hat: Tensor                  # classifier probabilities on the surrogate, (B, N, K)
    internals: dict[str, Tensor] = field(default_factory=dict)


class CaST(Module):
    def __init__(self, graph: STGraph, config: ModelConfig):
        self.config = config
        self.graph = graph
        rng = np.random.default_rng(config.seed)
        c = config
        self.disentangler = Disentangler(rng, c.in_dim, c.hidden, c.window, c.backbone_layers,
                                         c.max_kernel_exp)
        self.codebook = Codebook(rng, c.codebook_size, c.hidden, c.identical_codebook_init)
        self.deconfounder = Deconfounder(rng, graph, c.edge_features, c.hidden, c.laguerre_order,
                                         c.gcn_depth, c.pos_dim, c.laplacian_scale)
        pred_in = 2 * c.hidden if c.use_env else c.hidden
        self.predictor = MLP(rng, [pred_in, c.hidden, c.hidden, c.horizon * c.out_dim])
        self.classifier = MLP(rng, [c.hidden, c.hidden, c.hidden, c.codebook_size])

    def classifier_parameters(self) -> set[int]:
        return {id(p) for p in self.classifier.parameters()}

    def classify(self, h: Tensor, frozen: bool = False) -> Tensor:
        """Environment probabilities from surrogate features.

        With ``frozen`` the classifier weights are used as constants, so gradients
        reach only ``h``.
        """
        x = h
        layers = self.classifier.layers
        for i, layer in enumerate(layers):
            w = ops.stop_gradient(layer.weight) if frozen else layer.weight
            b = ops.stop_gradient(layer.bias) if frozen else layer.bias
            x = ops.matmul(x, w) + b
            if i < len(layers) - 1:
                x = ops.relu(x)
        return ops.softmax(x, axis=-1)

    def forward(self, x, x_ed, mode: str = "train", temperature: float | None = None) -> ForwardResult:
        """
        Args:
            x: normalised inputs (B, T, N, D).
            x_ed: normalised edge signals (B, M, F').
            mode: ``"train"`` quantises to the nearest code, ``"test"`` uses soft assignment.
        """
        c = self.config
        x, x_ed = as_tensor(x), as_tensor(x_ed)
        if x.ndim != 4 or x.shape[1:] != (c.window, self.graph.num_nodes, c.in_dim):
            raise ShapeError(f"[input] expected (B, {c.window}, {self.graph.num_nodes}, {c.in_dim}), got {x.shape}")
        if x_ed.ndim != 3 or x_ed.shape[0] != x.shape[0] or x_ed.shape[1:] != (self.graph.num_edges, c.edge_features):
            raise ShapeError(f"[edge signal] expected ({x.shape[0]}, {self.graph.num_edges}, {c.edge_features}), got {x_ed.shape}")
        if mode not in ("train", "test"):
            raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")
        B, N = x.shape[0], self.graph.num_nodes
        h, h_e, h_i = self.disentangler(x)
        if mode == "train":
            h_e_hat, assign = self.codebook.quantize_hard(h_e)
        else:
            h_e_hat, assign = self.codebook.quantize_soft(
                h_e, c.soft_temperature if temperature is None else temperature)
        h_i_hat, strength = self.deconfounder(h_i, x_ed)
        features = ops.concat([h_e_hat, h_i_hat], axis=-1) if c.use_env else h_i_hat
        out = self.predictor(features)  # (B, N, S*D')
        y_hat = ops.transpose(out.reshape(B, N, c.horizon, c.out_dim), (0, 2, 1, 3))
        z_hat = self.classify(h_i_hat, frozen=c.mi_mode == "adversarial")
        internals = {"H": h, "H_e": h_e, "H_i": h_i, "H_e_hat": h_e_hat, "H_i_hat": h_i_hat,
                     "A_cau": strength}
        return ForwardResult(y_hat, assign, z_hat, internals)

    def predict(self, x, x_ed, mode: str = "test") -> np.ndarray:
        with no_grad():
            return self.forward(x, x_ed, mode).y_hat.data
