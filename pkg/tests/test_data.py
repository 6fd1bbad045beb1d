import json

import numpy as np
import pytest

from cast_stg.data import (DataValidationError, DatasetManifest, Normalizer, Regime, SyntheticScenario,
                           edge_perturb, load_dataset, make_windows, minimum_length, regime_shift,
                           split_boundaries, synthesize_ood, window_starts, write_synthetic)
from cast_stg.data.loading import interpolate_missing, read_signal

from helpers import forecast_data


def write_toy(tmp_path, rows=None, coords_n=3, **manifest):
    stamps = [f"2020-01-01T{h:02d}:00:00" for h in range(10)]
    if rows is None:
        rows = [[str(t + 10 * n) for n in range(3)] for t in range(10)]
    lines = ["timestamp,a,b,c"] + [",".join([s] + r) for s, r in zip(stamps, rows)]
    (tmp_path / "signal.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "edges.txt").write_text("# src dst\n0 1\n1 2\n")
    (tmp_path / "coords.csv").write_text("node,x,y\n" + "".join(f"{i},{i}.0,0.0\n" for i in range(coords_n)))
    m = {"name": "toy", "signal": "signal.csv", "edges": "edges.txt", "coords": "coords.csv",
         "window": 2, "horizon": 1, "tau": 1, **manifest}
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    return tmp_path / "manifest.json"


def test_toy_csv_shape(tmp_path):
    ds = load_dataset(DatasetManifest.load(write_toy(tmp_path)))
    assert ds.series.shape == (10, 3, 1)
    assert ds.graph.edges == ((0, 1), (1, 2))
    assert ds.timestamps[1] - ds.timestamps[0] == np.timedelta64(3600, "s")


def test_missing_cell_is_mean_of_neighbours(tmp_path):
    rows = [[str(float(t * t)), "1", "2"] for t in range(10)]
    rows[4][0] = ""
    ds = load_dataset(DatasetManifest.load(write_toy(tmp_path, rows)))
    assert ds.series[4, 0, 0] == (9.0 + 25.0) / 2


def test_boundary_gaps_hold_nearest_value():
    x = np.array([[np.nan], [2.0], [np.nan], [4.0], [np.nan]])
    np.testing.assert_array_equal(interpolate_missing(x)[:, 0], [2.0, 2.0, 3.0, 4.0, 4.0])


@pytest.mark.parametrize("body, line", [
    ("2020-01-01T00:00:00,1,2\n", 2),
    ("2020-01-01T00:00:00,1,2,3\nnot-a-time,1,2,3\n", 3),
    ("2020-01-01T00:00:00,1,x,3\n", 2),
    ("2020-01-01T01:00:00,1,2,3\n2020-01-01T00:00:00,1,2,3\n", 3),
])
def test_bad_signal_rows_name_the_line(tmp_path, body, line):
    path = tmp_path / "s.csv"
    path.write_text("timestamp,a,b,c\n" + body)
    with pytest.raises(DataValidationError, match=f":{line}:"):
        read_signal(path)


def test_node_count_mismatch(tmp_path):
    with pytest.raises(DataValidationError, match="3 nodes but 4"):
        load_dataset(DatasetManifest.load(write_toy(tmp_path, coords_n=4)))


@pytest.mark.parametrize("patch", [{"split": [1, 0, 1]}, {"tau": 5}, {"window": 0}, {"bogus": 1},
                                   {"metric": "manhattan"}, {"targets": [3]}])
def test_manifest_validation(tmp_path, patch):
    with pytest.raises(DataValidationError):
        DatasetManifest.load(write_toy(tmp_path, **patch))


def test_split_fractions_sum_to_one():
    m = DatasetManifest("x", "s", "e", "c", split=[8, 1, 1])
    assert sum(m.split) == pytest.approx(1.0)


@pytest.mark.parametrize("length, ratios, expected", [
    (100, [4, 1, 1], (66, 83, 100)),
    (100, [8, 1, 1], (80, 90, 100)),
    (17856, [8, 1, 1], (14284, 16070, 17856)),
])
def test_split_boundaries(length, ratios, expected):
    assert split_boundaries(length, ratios) == expected


def test_window_count():
    assert len(window_starts(66, 83, 4, 3, 0)) == 17 - 4 - 3 + 1
    assert len(window_starts(0, 5, 4, 3, 0)) == 0
    assert window_starts(0, 66, 4, 3, 10)[0] == 10


@pytest.fixture(scope="module")
def shifted():
    return forecast_data(regime_shift(seed=0, length=600))


def test_windows_respect_splits(shifted):
    data, synth = shifted
    b1, b2, b3 = data.boundaries
    T, S = data["train"].x.shape[1], data["train"].y.shape[1]
    for name, (lo, hi) in zip(("train", "val", "test"), ((0, b1), (b1, b2), (b2, b3))):
        starts = data[name].starts
        assert starts.min() >= lo and starts.max() + T + S <= hi
        assert len(starts) == hi - max(lo, data.edge_config.history) - T - S + 1
    ts = synth.dataset.timestamps
    assert ts[data["train"].starts.max() + T + S - 1] < ts[data["val"].starts.min()]
    assert ts[data["val"].starts.max() + T + S - 1] < ts[data["test"].starts.min()]


def test_window_contents_and_invariants(shifted):
    data, synth = shifted
    series = data.normalizer.transform(synth.dataset.series)
    batch = data["val"]
    s = batch.starts[3]
    np.testing.assert_array_equal(batch.x[3], series[s:s + 24])
    np.testing.assert_array_equal(batch.y[3], series[s + 24:s + 48])
    for name in ("train", "val", "test"):
        b = data[name]
        assert np.isfinite(b.x).all() and np.isfinite(b.y).all() and np.isfinite(b.edge).all()
        assert b.edge.shape[1:] == (data.graph.num_edges, 6)


def test_normaliser_uses_training_split_only(shifted):
    data, synth = shifted
    b1 = data.boundaries[0]
    np.testing.assert_allclose(data.normalizer.mean, synth.dataset.series[:b1].mean(0), rtol=1e-12)
    edges = data.normalizer.transform_edges(data["train"].edge).reshape(-1, 6)
    np.testing.assert_allclose(edges[:, 1:].mean(0), 0.0, atol=1e-10)


def test_denormalisation_round_trip():
    rng = np.random.default_rng(0)
    x = rng.normal(5.0, 3.0, size=(50, 4, 2))
    norm = Normalizer.fit(x[:30])
    np.testing.assert_allclose(norm.inverse(norm.transform(x)), x, atol=1e-12)
    np.testing.assert_allclose(norm.inverse(norm.transform(x)[..., 1:], [1]), x[..., 1:], atol=1e-12)


def test_regime_label_is_minus_one_for_mixed_windows(shifted):
    data, synth = shifted
    batch = data["train"]
    for start, label in zip(batch.starts, batch.regimes):
        block = synth.regimes[start:start + 24]
        assert label == (block[0] if np.all(block == block[0]) else -1)


def test_too_short_series_reports_minimum():
    sc = regime_shift(seed=0, length=120)
    m = DatasetManifest("x", "-", "-", "-")
    with pytest.raises(DataValidationError, match=str(minimum_length(m))):
        make_windows(synthesize_ood(sc).dataset, m)


def flat_scenario(noise=0.0, diffusion=0.0):
    return SyntheticScenario(
        num_nodes=3, edges=[(0, 1), (1, 2)], coords=[(0, 0), (1, 0), (2, 0)], length=200,
        schedule=[(0, 100, 0), (100, 200, 1)],
        regimes={0: Regime(-2.0, 0.5, 1.0, 12.0), 1: Regime(3.0, 0.5, 1.0, 12.0)},
        diffusion=[diffusion, diffusion], noise=noise, seed=3)


def test_decoupled_nodes_follow_their_base_process():
    x = synthesize_ood(flat_scenario()).dataset.series[:, :, 0]
    t = np.arange(200)
    # without noise the AR deviation stays zero: regime mean plus a unit sinusoid of period 12
    residual = x - np.where(t < 100, -2.0, 3.0)[:, None]
    assert np.abs(residual).max() <= 1.0 + 1e-12
    np.testing.assert_allclose(residual[12:], residual[:-12], atol=1e-12)
    # a quarter period apart the sinusoid is in quadrature: sin^2 + cos^2 = 1
    np.testing.assert_allclose(residual[:97] ** 2 + residual[3:100] ** 2, 1.0, atol=1e-12)


def test_regime_means_separate():
    synth = synthesize_ood(flat_scenario(noise=0.3, diffusion=0.1))
    x = synth.dataset.series[:, :, 0]
    assert x[synth.regimes == 1].mean() - x[synth.regimes == 0].mean() > 4.0


def test_generator_is_deterministic():
    a = synthesize_ood(edge_perturb(seed=4, length=400)).dataset.series
    b = synthesize_ood(edge_perturb(seed=4, length=400)).dataset.series
    assert a.tobytes() == b.tobytes()


def test_schedule_must_tile_timeline():
    with pytest.raises(ValueError, match="tile"):
        SyntheticScenario(2, [(0, 1)], [(0, 0), (1, 0)], 10, [(0, 4, 0), (5, 10, 0)],
                          {0: Regime(0, 0, 0, 1)}, [0.1])


def test_perturbation_changes_only_one_coefficient():
    sc = edge_perturb(seed=0, length=600)
    from cast_stg.data.synthetic import coefficient_series
    coef = coefficient_series(sc)
    edge, start, end, value = sc.perturbations[0]
    assert np.all(coef[start:end, edge] == value)
    np.testing.assert_array_equal(np.delete(coef, edge, axis=1), 0.2)
    assert np.all(coefficient_series(sc.without_perturbations()) == 0.2)


def test_written_dataset_round_trips(tmp_path):
    synth = synthesize_ood(regime_shift(seed=1, length=400))
    manifest = DatasetManifest.load(write_synthetic(synth, tmp_path))
    ds = load_dataset(manifest)
    assert ds.series.tobytes() == synth.dataset.series.tobytes()
    np.testing.assert_array_equal(ds.regimes, synth.regimes)
    np.testing.assert_array_equal(ds.timestamps, synth.dataset.timestamps)
    back = SyntheticScenario.from_dict(json.loads((tmp_path / "scenario.json").read_text()))
    assert back.schedule == synth.scenario.schedule
