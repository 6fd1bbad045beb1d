from .loading import Dataset, interpolate_missing, load_dataset
from .manifest import DataValidationError, DatasetManifest
from .synthetic import (PRESETS, Regime, SyntheticData, SyntheticScenario, edge_perturb,
                        regime_shift, synthesize_ood, write_synthetic)
from .windows import (ForecastData, Normalizer, WindowBatch, make_windows, minimum_length,
                      split_boundaries, window_starts)

__all__ = [
    "DataValidationError", "Dataset", "DatasetManifest", "ForecastData", "Normalizer", "PRESETS",
    "Regime", "SyntheticData", "SyntheticScenario", "WindowBatch", "edge_perturb",
    "interpolate_missing", "load_dataset", "make_windows", "minimum_length", "regime_shift",
    "split_boundaries", "synthesize_ood", "window_starts", "write_synthetic",
]
