"""Edge-level causal filtering and causal-strength-gated message passing."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .autodiff import ops
from .autodiff.nn import MLP, Linear, Module, parameter
from .autodiff.tensor import ShapeError, Tensor, as_tensor
from .serialization import dumps
from .topology import STGraph, build_boundary_1, hodge_laplacian_1, laguerre_apply


class CausalGCN(Module):
    """``K_b`` message-passing layers; layer ``k`` weights edge messages by column ``k``
    of the causal strength matrix.  Messages travel from ``src`` to ``dst``."""

    def __init__(self, rng, graph: STGraph, width: int, depth: int):
        self.graph = graph
        self.depth = depth
        self.msg = [Linear(rng, width, width, bias=False) for _ in range(depth)]
        self.self_path = [Linear(rng, width, width) for _ in range(depth)]
        scatter = np.zeros((graph.num_nodes, graph.num_edges))
        scatter[graph.dst, np.arange(graph.num_edges)] = 1.0
        self._scatter = Tensor(scatter)

    def forward(self, h, strength, activation=ops.relu) -> Tensor:
        """
        Args:
            h: entity features (..., N, F).
            strength: causal strengths (..., M, K_b).
            activation: applied after every layer except the last.
        """
        h, strength = as_tensor(h), as_tensor(strength)
        if h.shape[-2] != self.graph.num_nodes:
            raise ShapeError(f"entity features have {h.shape[-2]} nodes, graph has {self.graph.num_nodes}")
        if strength.shape[-2:] != (self.graph.num_edges, self.depth):
            raise ShapeError(f"causal strength shape {strength.shape} != (..., {self.graph.num_edges}, {self.depth})")
        src = self.graph.src
        for k in range(self.depth):
            gathered = ops.take(h, src, axis=-2)  # (..., M, F)
            weighted = self.msg[k](gathered) * strength[..., k:k + 1]
            h_next = self.self_path[k](h) + ops.matmul(self._scatter, weighted)
            h = activation(h_next) if k < self.depth - 1 else h_next
        return h


class Deconfounder(Module):
    def __init__(self, rng: np.random.Generator, graph: STGraph, edge_features: int, width: int,
                 order: int = 3, depth: int = 2, pos_dim: int = 8, laplacian_scale: float = 1.0):
        if order < 1:
            raise ValueError("Laguerre order must be >= 1")
        self.graph = graph
        self.laplacian = hodge_laplacian_1(build_boundary_1(graph))
        self.laplacian_scale = laplacian_scale
        self.edge_encoder = MLP(rng, [edge_features, width, width])
        theta = rng.normal(0.0, 0.1, size=order)
        theta[0] += 1.0
        self.theta = parameter(theta)
        self.strength = Linear(rng, width, depth)
        self.gcn = CausalGCN(rng, graph, width, depth)
        self.position = parameter(rng.normal(0.0, 1.0, size=(graph.num_nodes, pos_dim)))
        self.position_proj = Linear(rng, pos_dim, width)

    def edge_encode(self, x_ed) -> Tensor:
        return self.edge_encoder(x_ed)

    def filter_causation(self, h_ed) -> Tensor:
        return laguerre_apply(self.laplacian, h_ed, self.theta, self.laplacian_scale)

    def causal_strength(self, h_ed_filtered) -> Tensor:
        return ops.sigmoid(self.strength(h_ed_filtered))

    def position_branch(self) -> Tensor:
        return self.position_proj(self.position)

    def forward(self, h_i, x_ed) -> tuple[Tensor, Tensor]:
        """Returns the surrogate entity representation (..., N, F) and the causal strengths (..., M, K_b)."""
        x_ed = as_tensor(x_ed)
        if x_ed.shape[-2] != self.graph.num_edges:
            raise ShapeError(f"edge signal has {x_ed.shape[-2]} rows, graph has {self.graph.num_edges} edges")
        strength = self.causal_strength(self.filter_causation(self.edge_encode(x_ed)))
        h_ir = self.gcn(h_i, strength)
        return surrogate(h_ir, self.position_branch()), strength


def surrogate(h_ir, h_ia) -> Tensor:
    h_ir, h_ia = as_tensor(h_ir), as_tensor(h_ia)
    if h_ir.shape[-2:] != h_ia.shape[-2:]:
        raise ShapeError(f"surrogate branches differ: {h_ir.shape} vs {h_ia.shape}")
    return h_ir + h_ia


def causal_report(strength: np.ndarray, graph: STGraph, window_ids: Iterable) -> list[dict]:
    """One row per (window, edge, layer) with the causal strength.

    Args:
        strength: (W, M, K_b) array of strengths for the listed windows.
    """
    strength = np.asarray(strength, dtype=np.float64)
    rows = []
    for w, wid in enumerate(window_ids):
        for e, (s, d) in enumerate(graph.edges):
            for k in range(strength.shape[-1]):
                rows.append({"window_id": wid, "src": s, "dst": d, "layer": k,
                             "strength": float(strength[w, e, k])})
    return rows


def dumps_report(rows) -> str:
    return dumps(rows)
