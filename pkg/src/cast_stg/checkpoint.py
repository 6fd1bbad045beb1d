"""Save and restore a trained model with its data pipeline state and optimizer moments."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff.optim import Adam
from .data.manifest import DatasetManifest
from .data.windows import Normalizer
from .edge_features import EdgeFeatureConfig
from .model import CaST, ModelConfig
from .serialization import CheckpointError, read_container, write_container
from .topology import STGraph


@dataclass
class Checkpoint:
    model: CaST
    normalizer: Normalizer
    edge_config: EdgeFeatureConfig
    optimizer: Adam
    manifest: DatasetManifest | None
    meta: dict


def save_checkpoint(path: str | Path, model: CaST, optimizer: Adam, normalizer: Normalizer,
                    edge_config: EdgeFeatureConfig, manifest: DatasetManifest | None = None,
                    extra: dict | None = None) -> None:
    graph = model.graph
    st = optimizer.state
    meta = {
        "config": model.config.to_dict(),
        "graph": {"num_nodes": graph.num_nodes, "edges": [list(e) for e in graph.edges]},
        "edge_config": asdict(edge_config),
        "adam": {"lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps, "step": st.step},
        "manifest": None if manifest is None else manifest.to_dict(),
        "manifest_dir": None if manifest is None else str(Path(manifest.base_dir).resolve()),
        "extra": extra or {},
    }
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    arrays.update({f"adam/{k}": v for k, v in optimizer.state_arrays().items()})
    arrays.update({f"normalizer/{k}": v for k, v in normalizer.arrays().items()})
    arrays["codebook/usage"] = model.codebook.usage.astype(np.float64)
    if graph.coords is not None:
        arrays["graph/coords"] = graph.coords
    write_container(path, meta, arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    meta, arrays = read_container(path)
    try:
        config = ModelConfig.from_dict(meta["config"])
        g = meta["graph"]
        graph = STGraph(g["num_nodes"], tuple(tuple(e) for e in g["edges"]), arrays.get("graph/coords"))
        model = CaST(graph, config)
        model.load_state_dict({k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")})
        model.codebook.usage[:] = arrays["codebook/usage"].astype(np.int64)
        norm = Normalizer(*(arrays[f"normalizer/{k}"] for k in ("mean", "std", "edge_mean", "edge_std")))
        a = meta["adam"]
        opt = Adam(model.named_parameters(), lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"])
        opt.load_state_arrays({k[len("adam/"):]: v for k, v in arrays.items() if k.startswith("adam/")},
                              a["step"])
        manifest = None
        if meta.get("manifest") is not None:
            manifest = DatasetManifest.from_dict(meta["manifest"], base_dir=meta["manifest_dir"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: inconsistent checkpoint: {exc}") from exc
    return Checkpoint(model, norm, EdgeFeatureConfig(**meta["edge_config"]), opt, manifest, meta)
