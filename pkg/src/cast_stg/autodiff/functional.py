"""Composite layers on top of the primitive ops: causal convolution, DFT,
layer normalisation and scaled dot-product attention."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import ops
from .tensor import ShapeError, Tensor, as_tensor, make_result


def conv1d(x, w, bias=None, dilation: int = 1, causal: bool = True) -> Tensor:
    """1D convolution over the last axis.

    Args:
        x: input of shape (B, C_in, L).
        w: kernel of shape (C_out, C_in, k).
        bias: optional (C_out,) bias.
        dilation: spacing between kernel taps.
        causal: left-pad with ``(k - 1) * dilation`` zeros so that output ``t``
            only sees inputs ``<= t`` and the length is preserved. With
            ``causal=False`` no padding is applied ("valid" convolution).

    Returns:
        Tensor of shape (B, C_out, L_out).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeError(f"conv1d expects x (B,C,L) and w (O,C,k), got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv1d channel mismatch: x {x.shape} vs w {w.shape}")
    k = w.shape[2]
    if k < 1 or dilation < 1:
        raise ShapeError(f"conv1d needs k >= 1 and dilation >= 1 (k={k}, dilation={dilation})")
    B, C, L = x.shape
    span = (k - 1) * dilation
    pad = span if causal else 0
    L_pad = L + pad
    if L_pad < span + 1:
        raise ShapeError(f"conv1d kernel span {span + 1} exceeds padded input length {L_pad}")
    L_out = L_pad - span

    xp = np.concatenate([np.zeros((B, C, pad)), x.data], axis=2) if pad else x.data
    # cols[b, c, j, t] = xp[b, c, t + j * dilation]
    cols = np.stack([xp[:, :, j * dilation: j * dilation + L_out] for j in range(k)], axis=2)
    wd = w.data
    out = np.einsum("ocj,bcjt->bot", wd, cols, optimize=True)
    parents = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None]
        parents.append(bias)

    def bw(g):
        gx = gw = None
        if x.requires_grad:
            gcols = np.einsum("ocj,bot->bcjt", wd, g, optimize=True)
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, :, j * dilation: j * dilation + L_out] += gcols[:, :, j, :]
            gx = gxp[:, :, pad:]
        if w.requires_grad:
            gw = np.einsum("bot,bcjt->ocj", g, cols, optimize=True)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return make_result(out, "conv1d", tuple(parents), bw)


@lru_cache(maxsize=32)
def _dft_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    # reduce kn mod n before scaling to keep the angles exact-ish for large products
    angle = 2.0 * np.pi * (np.outer(idx, idx) % n) / n
    cos, sin = np.cos(angle), np.sin(angle)
    cos.setflags(write=False)
    sin.setflags(write=False)
    return cos, sin


def dft(x, imag=None) -> tuple[Tensor, Tensor]:
    """Discrete Fourier transform along the last axis as an explicit O(L^2) product.

    Returns the (real, imaginary) pair. ``imag`` may be given for complex input.
    """
    x = as_tensor(x)
    n = x.shape[-1]
    if n < 1:
        raise ShapeError("dft needs a non-empty last axis")
    cos, sin = _dft_matrices(n)
    c, s = Tensor(cos), Tensor(sin)
    re = ops.matmul(x, c)
    im = ops.neg(ops.matmul(x, s))
    if imag is not None:
        imag = as_tensor(imag)
        re = re + ops.matmul(imag, s)
        im = im + ops.matmul(imag, c)
    return re, im


def idft(re, im) -> tuple[Tensor, Tensor]:
    """Inverse of :func:`dft` (includes the 1/L normalisation)."""
    re, im = as_tensor(re), as_tensor(im)
    n = re.shape[-1]
    cos, sin = _dft_matrices(n)
    c, s = Tensor(cos / n), Tensor(sin / n)
    out_re = ops.matmul(re, c) - ops.matmul(im, s)
    out_im = ops.matmul(re, s) + ops.matmul(im, c)
    return out_re, out_im


def layer_norm(x, gain=None, bias=None, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    x = as_tensor(x)
    mu = ops.mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = ops.mean(centered * centered, axis=-1, keepdims=True)
    out = centered / ops.sqrt(var + eps)
    if gain is not None:
        out = out * gain
    if bias is not None:
        out = out + bias
    return out


def attention(q, k, v) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention over the second-to-last axis.

    Args:
        q, k, v: tensors of shape (..., T, F).

    Returns:
        ``(output, weights)`` where weights has shape (..., T, T) and rows sum to 1.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = ops.matmul(q, ops.swapaxes(k, -1, -2)) * scale
    weights = ops.softmax(scores, axis=-1)
    return ops.matmul(weights, v), weights
