"""Train with and without the environment codebook on a series whose test period is an unseen regime.

    python demos/regime_shift.py --seed 0 --epochs 10
"""
import argparse

from cast_stg.data import DatasetManifest, make_windows, regime_shift, synthesize_ood
from cast_stg.training import config_for, evaluate, train


def windows_for(scenario):
    manifest = DatasetManifest(name=scenario.name, signal="-", edges="-", coords="-", split=scenario.split,
                               window=scenario.window, horizon=scenario.horizon, tau=scenario.tau)
    return make_windows(synthesize_ood(scenario).dataset, manifest)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    args = p.parse_args()

    data = windows_for(regime_shift(seed=args.seed))
    for use_env in (True, False):
        cfg = config_for(data, hidden=16, batch_size=32, epochs=args.epochs, seed=args.seed, use_env=use_env)
        result = train(data, cfg)
        report = evaluate(result.model, data, "test")
        label = "with environment" if use_env else "without environment"
        print(f"{label:>20}: test MAE {report['mae']:.3f}  RMSE {report['rmse']:.3f}"
              f"  (best epoch {result.best_epoch})")
        usage = result.model.codebook.usage
        print(f"{'':>20}  codebook usage {list(map(int, usage))}")


if __name__ == "__main__":
    main()
