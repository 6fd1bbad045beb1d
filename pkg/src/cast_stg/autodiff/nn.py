"""Parameter containers and the small layer zoo used by the model."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as Fn
from . import ops
from .tensor import Tensor


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-limit, limit, size=shape))


class Module:
    """Base class; parameters are discovered by walking attributes in definition order."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{full}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"parameter {name}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, fan_in: int, fan_out: int, bias: bool = True,
                 zero: bool = False):
        self.weight = parameter(np.zeros((fan_in, fan_out))) if zero else \
            glorot(rng, fan_in, fan_out, (fan_in, fan_out))
        self.bias = parameter(np.zeros(fan_out)) if bias else None

    def forward(self, x) -> Tensor:
        out = ops.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class MLP(Module):
    """Stack of linear layers with ReLU between them (none after the last)."""

    def __init__(self, rng: np.random.Generator, sizes: list[int], zero_last: bool = False):
        self.layers = [Linear(rng, a, b, zero=zero_last and i == len(sizes) - 2)
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def forward(self, x) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x


class CausalConv1d(Module):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 dilation: int = 1, zero: bool = False):
        fan_in = c_in * kernel
        shape = (c_out, c_in, kernel)
        self.weight = parameter(np.zeros(shape)) if zero else glorot(rng, fan_in, c_out, shape)
        self.bias = parameter(np.zeros(c_out))
        self.dilation = dilation

    def forward(self, x) -> Tensor:
        return Fn.conv1d(x, self.weight, self.bias, dilation=self.dilation)


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.gain = parameter(np.ones(width))
        self.bias = parameter(np.zeros(width))
        self.eps = eps

    def forward(self, x) -> Tensor:
        return Fn.layer_norm(x, self.gain, self.bias, self.eps)


class SelfAttention(Module):
    """Single-head scaled dot-product self-attention over the time axis of (..., T, F)."""

    def __init__(self, rng: np.random.Generator, width: int):
        self.query = Linear(rng, width, width)
        self.key = Linear(rng, width, width)
        self.value = Linear(rng, width, width)
        self.last_weights: np.ndarray | None = None

    def forward(self, x) -> Tensor:
        out, weights = Fn.attention(self.query(x), self.key(x), self.value(x))
        self.last_weights = weights.data
        return out
