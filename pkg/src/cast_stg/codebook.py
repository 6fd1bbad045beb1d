"""Environment codebook: nearest-neighbour quantisation with a straight-through
gradient during training and a temperature softmax over distances at test time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.nn import Module, parameter
from .autodiff.tensor import ShapeError, Tensor, as_tensor


@dataclass
class EnvAssignment:
    z: np.ndarray  # (..., K): one-hot (hard) or probabilities (soft)
    mode: str

    @property
    def index(self) -> np.ndarray:
        return self.z.argmax(-1)


class Codebook(Module):
    def __init__(self, rng: np.random.Generator, size: int, width: int, identical_init: bool = False):
        if size < 1:
            raise ValueError("codebook needs at least one entry")
        scale = 1.0 / np.sqrt(width)
        if identical_init:
            rows = np.repeat(rng.normal(0.0, scale, size=(1, width)), size, axis=0)
        else:
            rows = rng.normal(0.0, scale, size=(size, width))
        self.embeddings = parameter(rows)
        self.usage = np.zeros(size, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def width(self) -> int:
        return self.embeddings.shape[1]

    def _check(self, h: Tensor) -> None:
        if self.size == 0:
            raise ValueError("empty codebook")
        if h.shape[-1] != self.width:
            raise ShapeError(f"environment features have width {h.shape[-1]}, codebook {self.width}")

    def nearest(self, h: np.ndarray) -> np.ndarray:
        """Index of the closest row for every vector in ``h``; ties go to the lowest index."""
        d2 = ((h[..., None, :] - self.embeddings.data) ** 2).sum(-1)
        return d2.argmin(-1)

    def quantize_hard(self, h_e, track_usage: bool = True) -> tuple[Tensor, EnvAssignment]:
        h_e = as_tensor(h_e)
        self._check(h_e)
        idx = self.nearest(h_e.data)
        if track_usage:
            self.usage += np.bincount(idx.ravel(), minlength=self.size)
        rows = self.embeddings.data[idx]
        quantized = ops.straight_through(rows, h_e)
        return quantized, EnvAssignment(np.eye(self.size)[idx], "hard")

    def soft_probabilities(self, h_e, temperature: float = 1.0) -> Tensor:
        if not temperature > 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        h_e = as_tensor(h_e)
        self._check(h_e)
        diff = ops.reshape(h_e, h_e.shape[:-1] + (1, self.width)) - self.embeddings
        d2 = ops.sum(diff * diff, axis=-1)
        return ops.softmax(d2 * (-1.0 / temperature), axis=-1)

    def quantize_soft(self, h_e, temperature: float = 1.0) -> tuple[Tensor, EnvAssignment]:
        q = self.soft_probabilities(h_e, temperature)
        return ops.matmul(q, self.embeddings), EnvAssignment(q.data, "soft")

    def reset_usage(self) -> None:
        self.usage[:] = 0


def codebook_loss(h_e, index: np.ndarray, codebook: Codebook, alpha: float) -> tuple[Tensor, Tensor, Tensor]:
    """VQ loss: ``|sg[H_e] - e_z|^2 + alpha * |H_e - sg[e_z]|^2``, each a mean over rows.

    Returns ``(total, codebook_term, commitment_term)`` where the commitment term
    already includes ``alpha``.
    """
    h_e = as_tensor(h_e)
    selected = ops.take(codebook.embeddings, np.asarray(index).reshape(-1), axis=0)
    selected = ops.reshape(selected, h_e.shape)
    d_code = ops.stop_gradient(h_e) - selected
    d_commit = h_e - ops.stop_gradient(selected)
    term1 = ops.mean(ops.sum(d_code * d_code, axis=-1))
    term2 = ops.mean(ops.sum(d_commit * d_commit, axis=-1)) * alpha
    return term1 + term2, term1, term2
