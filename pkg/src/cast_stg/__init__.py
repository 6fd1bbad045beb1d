"""Causal spatio-temporal forecasting on graphs, built on a small numpy autodiff engine."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .codebook import Codebook, codebook_loss
from .deconfounder import Deconfounder, causal_report
from .disentangler import Disentangler
from .edge_features import EdgeFeatureConfig, dtw, edge_signals, pearson, time_delay_dtw
from .model import CaST, ModelConfig
from .topology import (STGraph, build_boundary_1, graph_laplacian_0, hodge_laplacian_1,
                       laguerre_apply, laguerre_polynomials, spectral_filter_matrix)
from .training import Trainer, config_for, evaluate, mi_loss, prediction_loss, total_loss, train

__version__ = "0.1.0"

__all__ = [
    "CaST", "Checkpoint", "Codebook", "Deconfounder", "Disentangler", "EdgeFeatureConfig",
    "ModelConfig", "STGraph", "Trainer", "build_boundary_1", "causal_report", "codebook_loss",
    "config_for", "dtw", "edge_signals", "evaluate", "graph_laplacian_0", "hodge_laplacian_1",
    "laguerre_apply", "laguerre_polynomials", "load_checkpoint", "mi_loss", "pearson",
    "prediction_loss", "save_checkpoint", "spectral_filter_matrix", "time_delay_dtw",
    "total_loss", "train",
]
