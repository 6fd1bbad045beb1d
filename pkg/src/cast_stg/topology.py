"""Oriented graphs, boundary operators, Hodge Laplacians and Laguerre edge filters."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .autodiff.tensor import Tensor, as_tensor


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class STGraph:
    """``N`` nodes and ``M`` oriented edges; edge ``j`` is ``edges[j] = (src, dst)``."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    coords: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(s), int(d)) for s, d in self.edges))
        for j, (s, d) in enumerate(self.edges):
            if s == d:
                raise GraphError(f"edge {j} is a self-loop on node {s}")
            if not (0 <= s < self.num_nodes and 0 <= d < self.num_nodes):
                raise GraphError(f"edge {j} ({s}->{d}) references a node outside 0..{self.num_nodes - 1}")
        if self.coords is not None and len(self.coords) != self.num_nodes:
            raise GraphError(f"{len(self.coords)} coordinates for {self.num_nodes} nodes")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def src(self) -> np.ndarray:
        return np.array([s for s, _ in self.edges], dtype=np.intp)

    @property
    def dst(self) -> np.ndarray:
        return np.array([d for _, d in self.edges], dtype=np.intp)


def build_boundary_1(g: STGraph) -> np.ndarray:
    """Signed node-by-edge incidence: +1 at the head (dst), -1 at the tail (src)."""
    b = np.zeros((g.num_nodes, g.num_edges))
    for j, (s, d) in enumerate(g.edges):
        if s == d:
            raise GraphError(f"edge {j} is a self-loop")
        b[s, j] = -1.0
        b[d, j] = 1.0
    return b


def graph_laplacian_0(b1: np.ndarray) -> np.ndarray:
    return b1 @ b1.T


def hodge_laplacian_1(b1: np.ndarray, b2: np.ndarray | None = None) -> np.ndarray:
    """Edge Laplacian ``d1^T d1 + d2 d2^T``; triangles are ignored unless ``b2`` is given."""
    lap = b1.T @ b1
    if b2 is not None:
        lap = lap + b2 @ b2.T
    return lap


def edge_hop_distances(g: STGraph, source_edge: int) -> np.ndarray:
    """Breadth-first hop count from ``source_edge`` in the edge graph (edges sharing a node)."""
    incident: dict[int, list[int]] = {}
    for j, (s, d) in enumerate(g.edges):
        incident.setdefault(s, []).append(j)
        incident.setdefault(d, []).append(j)
    dist = np.full(g.num_edges, -1, dtype=int)
    dist[source_edge] = 0
    queue = deque([source_edge])
    while queue:
        e = queue.popleft()
        for node in g.edges[e]:
            for f in incident[node]:
                if dist[f] < 0:
                    dist[f] = dist[e] + 1
                    queue.append(f)
    return dist


def laguerre_polynomials(lam: np.ndarray, order: int) -> np.ndarray:
    """Evaluate T_0..T_{order-1} at the points ``lam``; returns shape (order, *lam.shape)."""
    lam = np.asarray(lam, dtype=np.float64)
    out = [np.ones_like(lam)]
    if order > 1:
        out.append(1.0 - lam)
    for u in range(1, order - 1):
        out.append(((2 * u + 1 - lam) * out[u] - u * out[u - 1]) / (u + 1))
    return np.stack(out[:order])


def laguerre_apply(lap, h, theta, laplacian_scale: float = 1.0) -> Tensor:
    """Filter edge signals with ``sum_u theta_u T_u(L) H`` using the three-term recurrence.

    Args:
        lap: (M, M) edge Laplacian (array or constant tensor).
        h: (..., M, F) edge signals.
        theta: (U,) filter coefficients, U >= 1.
        laplacian_scale: multiplies ``lap`` before filtering (1.0 = raw operator).

    Only matrix-vector products with ``L`` are formed; ``T_u(L)`` is never built.
    """
    theta = as_tensor(theta)
    h = as_tensor(h)
    if theta.ndim != 1 or theta.shape[0] < 1:
        raise ValueError(f"need at least one Laguerre coefficient, got shape {theta.shape}")
    lap_t = Tensor(np.asarray(lap.data if isinstance(lap, Tensor) else lap) * laplacian_scale)
    if h.shape[-2] != lap_t.shape[0]:
        raise ValueError(f"signal has {h.shape[-2]} rows but the Laplacian is {lap_t.shape}")
    order = theta.shape[0]
    prev = h
    out = h * theta[0]
    if order == 1:
        return out
    cur = h - ops.matmul(lap_t, h)
    out = out + cur * theta[1]
    for u in range(1, order - 1):
        nxt = ((2 * u + 1) * cur - ops.matmul(lap_t, cur) - u * prev) * (1.0 / (u + 1))
        prev, cur = cur, nxt
        out = out + cur * theta[u + 1]
    return out


def spectral_filter_matrix(lap: np.ndarray, theta) -> np.ndarray:
    """Dense filter ``sum_j h(lambda_j) psi_j psi_j^T`` from an eigendecomposition (small M only)."""
    theta = np.asarray(theta, dtype=np.float64)
    try:
        lam, psi = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"eigendecomposition failed: {exc}") from exc
    response = theta @ laguerre_polynomials(lam, len(theta))
    return (psi * response) @ psi.T
