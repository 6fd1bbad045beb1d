"""Backbone TCN plus the environment / entity encoders that split the latent
sequence into a per-node environment vector and a per-node entity vector."""
from __future__ import annotations

import numpy as np

from .autodiff import functional as Fn
from .autodiff import ops
from .autodiff.nn import CausalConv1d, LayerNorm, Linear, Module, SelfAttention
from .autodiff.tensor import ShapeError, Tensor, as_tensor


def _to_sequences(h: Tensor) -> Tensor:
    """(B, T, N, F) -> (B*N, F, T) for temporal convolution."""
    B, T, N, F = h.shape
    return ops.transpose(h, (0, 2, 3, 1)).reshape(B * N, F, T)


def _from_sequences(s: Tensor, B: int, N: int) -> Tensor:
    """(B*N, F, T) -> (B, T, N, F)."""
    _, F, T = s.shape
    return ops.transpose(s.reshape(B, N, F, T), (0, 3, 1, 2))


class TemporalBlock(Module):
    def __init__(self, rng, width: int, dilation: int, kernel: int = 2):
        self.conv = CausalConv1d(rng, width, width, kernel, dilation)

    def forward(self, x):
        return x + ops.relu(self.conv(x))


class Backbone(Module):
    """Input projection, residual dilated causal conv blocks (dilation 1, 2, 4, ...)
    and an output projection, applied to every node independently."""

    def __init__(self, rng, in_dim: int, width: int, layers: int = 2, kernel: int = 2,
                 zero_output: bool = False):
        self.in_dim = in_dim
        self.inp = Linear(rng, in_dim, width)
        self.blocks = [TemporalBlock(rng, width, 2 ** i, kernel) for i in range(layers)]
        self.out = Linear(rng, width, width, zero=zero_output)

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[-1] != self.in_dim:
            raise ShapeError(f"backbone expects (B, T, N, {self.in_dim}), got {x.shape}")
        B, T, N, _ = x.shape
        h = _to_sequences(self.inp(x))
        for block in self.blocks:
            h = block(h)
        return self.out(_from_sequences(h, B, N))


class EnvEncoder(Module):
    """Parallel causal convolutions with kernels 1, 2, ..., 2**max_exp, concatenated,
    mean-pooled over time and projected back to ``width``."""

    def __init__(self, rng, width: int, max_exp: int = 3, zero_output: bool = False):
        self.width = width
        self.convs = [CausalConv1d(rng, width, width, 2 ** i) for i in range(max_exp + 1)]
        self.proj = Linear(rng, width * (max_exp + 1), width, zero=zero_output)

    def forward(self, h) -> Tensor:
        h = as_tensor(h)
        if h.ndim != 4 or h.shape[-1] != self.width:
            raise ShapeError(f"env encoder expects (B, T, N, {self.width}), got {h.shape}")
        B, T, N, F = h.shape
        seq = _to_sequences(h)
        mixed = ops.concat([conv(seq) for conv in self.convs], axis=1)  # (B*N, F*(S+1), T)
        pooled = ops.mean(mixed, axis=-1).reshape(B, N, -1)
        return self.proj(pooled)


class EntEncoder(Module):
    """Frequency branch (DFT -> linear over bins -> inverse DFT) plus a time branch
    (self-attention -> layer norm); branches are summed, mean-pooled and projected."""

    def __init__(self, rng, width: int, window: int):
        self.width, self.window = width, window
        self.freq = Linear(rng, 2 * window, 2 * window)
        self.attn = SelfAttention(rng, width)
        self.norm = LayerNorm(width)
        self.proj = Linear(rng, width, width)

    def frequency_branch(self, seq: Tensor) -> Tensor:
        """seq: (B, N, T, F) -> (B, N, T, F)."""
        T = seq.shape[-2]
        along_time = ops.swapaxes(seq, -1, -2)  # (B, N, F, T)
        re, im = Fn.dft(along_time)
        mixed = self.freq(ops.concat([re, im], axis=-1))
        re2, im2 = mixed[..., :T], mixed[..., T:]
        back, _ = Fn.idft(re2, im2)
        return ops.swapaxes(back, -1, -2)

    def time_branch(self, seq: Tensor) -> Tensor:
        return self.norm(self.attn(seq))

    def forward(self, h) -> Tensor:
        h = as_tensor(h)
        if h.ndim != 4 or h.shape[-1] != self.width or h.shape[1] != self.window:
            raise ShapeError(f"entity encoder expects (B, {self.window}, N, {self.width}), got {h.shape}")
        seq = ops.transpose(h, (0, 2, 1, 3))  # (B, N, T, F)
        fused = self.frequency_branch(seq) + self.time_branch(seq)
        return self.proj(ops.mean(fused, axis=2))


class Disentangler(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, width: int, window: int,
                 backbone_layers: int = 2, max_kernel_exp: int = 3):
        if 2 ** max_kernel_exp > window:
            raise ValueError(f"largest kernel 2**{max_kernel_exp} exceeds window {window}")
        self.backbone = Backbone(rng, in_dim, width, backbone_layers)
        self.env = EnvEncoder(rng, width, max_kernel_exp)
        self.ent = EntEncoder(rng, width, window)

    def forward(self, x) -> tuple[Tensor, Tensor, Tensor]:
        """Returns ``(H, H_e, H_i)`` with shapes (B,T,N,F), (B,N,F), (B,N,F)."""
        h = self.backbone(x)
        return h, self.env(h), self.ent(h)
