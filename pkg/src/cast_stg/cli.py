"""Command-line entry point.

Exit status: 0 on success, 1 for invalid input (bad flags, manifests, configs or
checkpoint files), 2 when a run fails after its inputs were accepted.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .autodiff.tensor import no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .data import DataValidationError, DatasetManifest, ForecastData, load_dataset, make_windows
from .data.synthetic import PRESETS, SyntheticScenario, synthesize_ood, write_synthetic
from .deconfounder import causal_report, dumps_report
from .serialization import CheckpointError, dumps, write_json
from .training import Trainer, config_for, evaluate
from .model import CaST

log = logging.getLogger("cast_stg")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def prepare_data(manifest: DatasetManifest) -> ForecastData:
    return make_windows(load_dataset(manifest), manifest)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc


def load_train_config(path: str | Path) -> tuple[DatasetManifest, dict, Path]:
    """Read ``{"manifest": ..., "model": {...}, "output_dir": ...}``; paths are relative to the file."""
    path = Path(path)
    cfg = _read_json(path)
    unknown = set(cfg) - {"manifest", "model", "output_dir"}
    if unknown:
        raise DataValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    if "manifest" not in cfg:
        raise DataValidationError(f"{path}: 'manifest' is required")
    manifest = DatasetManifest.load(path.parent / cfg["manifest"])
    out = path.parent / cfg.get("output_dir", "run")
    return manifest, dict(cfg.get("model", {})), out


def _window_ids(text: str, count: int) -> list[int]:
    if text == "all":
        return list(range(count))
    ids = []
    for part in text.split(","):
        if ":" in part:
            lo, hi = part.split(":", 1)
            ids.extend(range(int(lo or 0), int(hi or count)))
        else:
            ids.append(int(part))
    bad = [i for i in ids if not 0 <= i < count]
    if bad:
        raise DataValidationError(f"window ids {bad} outside 0..{count - 1}")
    return ids


def _checkpoint_data(ckpt, manifest_path: str | None) -> ForecastData:
    manifest = DatasetManifest.load(manifest_path) if manifest_path else ckpt.manifest
    if manifest is None:
        raise DataValidationError("checkpoint carries no manifest; pass --manifest")
    data = prepare_data(manifest)
    data.normalizer = ckpt.normalizer
    return data


# -- subcommands -------------------------------------------------------------------

def cmd_train(args) -> int:
    manifest, overrides, out = load_train_config(args.config)
    if args.out:
        out = Path(args.out)
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    data = prepare_data(manifest)
    try:
        config = config_for(data, **overrides)
    except (TypeError, ValueError) as exc:
        raise DataValidationError(f"{args.config}: {exc}") from exc
    trainer = Trainer(CaST(data.graph, config), config)
    result = trainer.fit(data)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.bin", result.model, result.optimizer, data.normalizer,
                    data.edge_config, manifest, {"best_epoch": result.best_epoch})
    write_json(out / "metrics.json", result.history)
    print(f"best epoch {result.best_epoch}, val MAE {result.best_val_mae:.3f}")
    print(f"wrote {out / 'checkpoint.bin'} and {out / 'metrics.json'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = _checkpoint_data(ckpt, args.manifest)
    report = evaluate(ckpt.model, data, args.split)
    print(f"{args.split}: MAE {report['mae']:.3f}  RMSE {report['rmse']:.3f}  ({report['windows']} windows)")
    for h in report["horizons"]:
        print(f"  steps {h['steps']:>6}: MAE {h['mae']:.3f}  RMSE {h['rmse']:.3f}")
    if args.output:
        write_json(args.output, report)
    return EXIT_OK


def cmd_inspect_codebook(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    cb = ckpt.model.codebook
    usage = cb.usage.copy()
    source = "training"
    if args.split:
        data = _checkpoint_data(ckpt, args.manifest)
        batch = data[args.split]
        with no_grad():
            h_e = ckpt.model.disentangler(batch.x)[1].data
        usage = np.bincount(cb.nearest(h_e).ravel(), minlength=cb.size)
        source = args.split
    report = {"size": cb.size, "width": cb.width, "embeddings": cb.embeddings.data,
              "usage": [int(u) for u in usage], "usage_source": source}
    _emit(args.output, dumps(report))
    return EXIT_OK


def cmd_export_causal(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = _checkpoint_data(ckpt, args.manifest)
    batch = data[args.split]
    ids = _window_ids(args.window, len(batch))
    sub = batch.subset(ids)
    with no_grad():
        strength = ckpt.model.forward(sub.x, data.model_edges(sub), "test").internals["A_cau"].data
    _emit(args.output, dumps_report(causal_report(strength, data.graph, ids)))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.scenario in PRESETS:
        scenario = PRESETS[args.scenario](seed=args.seed)
    else:
        try:
            scenario = SyntheticScenario.from_dict(_read_json(Path(args.scenario)))
        except (TypeError, ValueError) as exc:
            raise DataValidationError(f"{args.scenario}: {exc}") from exc
        if args.seed is not None:
            scenario.seed = args.seed
    path = write_synthetic(synthesize_ood(scenario), args.out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate_data(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    data = prepare_data(manifest)
    counts = ", ".join(f"{k} {len(data[k])}" for k in ("train", "val", "test"))
    print(f"ok: {data.graph.num_nodes} nodes, {data.graph.num_edges} edges; windows {counts}")
    return EXIT_OK


def _emit(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cast-stg", description="Spatio-temporal forecasting with environment "
                                             "codebooks and edge-level causal filtering.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (overrides the config)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="MAE/RMSE of a checkpoint on one split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--manifest", help="evaluate on another dataset with the same graph")
    e.add_argument("--output", help="also write the metrics as JSON")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("inspect-codebook", help="dump codebook rows and usage counts")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--split", choices=("train", "val", "test"),
                   help="recount usage on this split instead of reporting training usage")
    c.add_argument("--manifest")
    c.add_argument("--output")
    c.set_defaults(func=cmd_inspect_codebook)

    x = sub.add_parser("export-causal", help="per-edge causal strengths for chosen windows")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--window", required=True, help="window ids: 'all', '3', '0,5', '10:20'")
    x.add_argument("--split", choices=("train", "val", "test"), default="test")
    x.add_argument("--manifest")
    x.add_argument("--output")
    x.set_defaults(func=cmd_export_causal)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--scenario", required=True, help=f"preset ({', '.join(PRESETS)}) or scenario JSON")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("validate-data", help="check that a manifest loads and windows cleanly")
    v.add_argument("--manifest", required=True)
    v.set_defaults(func=cmd_validate_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataValidationError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any failure past validation is a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
