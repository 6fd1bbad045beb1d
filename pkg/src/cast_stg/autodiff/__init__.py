"""Minimal float64 tensor engine with reverse-mode differentiation."""
from . import functional, ops
from .gradcheck import gradcheck, numerical_grad
from .nn import MLP, CausalConv1d, LayerNorm, Linear, Module, SelfAttention, parameter
from .optim import Adam, AdamState, NonFiniteGradientError, adam_step
from .tensor import ShapeError, Tape, Tensor, as_tensor, backward, no_grad

__all__ = [
    "Adam", "AdamState", "CausalConv1d", "LayerNorm", "Linear", "MLP", "Module",
    "NonFiniteGradientError", "SelfAttention", "ShapeError", "Tape", "Tensor", "adam_step",
    "as_tensor", "backward", "functional", "gradcheck", "no_grad", "numerical_grad", "ops",
    "parameter",
]
