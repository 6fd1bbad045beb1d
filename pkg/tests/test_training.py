import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cast_stg.autodiff import ShapeError, backward
from cast_stg.autodiff.tensor import Tensor
from cast_stg.codebook import codebook_loss
from cast_stg.data import regime_shift
from cast_stg.model import CaST, ModelConfig
from cast_stg.training import (Trainer, TrainingDiverged, config_for, evaluate, horizon_groups, mae,
                               mi_loss, prediction_loss, rmse, total_loss)

from helpers import forecast_data, shrink


@pytest.fixture(scope="module")
def small_data():
    data, _ = forecast_data(regime_shift(seed=0, length=420))
    return shrink(data, train=10, val=6, test=6)


def small_config(data, **kw):
    return config_for(data, **{"hidden": 6, "codebook_size": 3, "pos_dim": 2, "batch_size": 4,
                               "epochs": 1, **kw})


@pytest.fixture
def model(small_data):
    return CaST(small_data.graph, small_config(small_data))


def forward(model, data, n=4):
    b = data["train"].subset(np.arange(n))
    return model.forward(b.x, data.model_edges(b), "train"), b


def test_prediction_loss_hand_case():
    assert prediction_loss([1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0, 4.0]).item() == 0.75


def test_prediction_loss_shape_mismatch():
    with pytest.raises(ValueError):
        prediction_loss(np.zeros(3), np.zeros(4))


def test_mi_loss_uniform_prediction():
    z = np.eye(4)[[0, 2]]
    assert mi_loss(z, np.full((2, 4), 0.25)).item() == pytest.approx(-1.3862943611198906, abs=1e-15)


def test_mi_loss_floor():
    assert mi_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])).item() == pytest.approx(math.log(1e-12))


@pytest.mark.parametrize("pred, true, expected_mae, expected_rmse", [
    ([1.0, 2.0], [1.0, 2.0], 0.0, 0.0),
    ([3.5, 3.5, 3.5], [1.0, 1.0, 1.0], 2.5, 2.5),
    ([0.0, 2.0], [0.0, 0.0], 1.0, math.sqrt(2)),
])
def test_metrics_hand_cases(pred, true, expected_mae, expected_rmse):
    assert mae(pred, true) == pytest.approx(expected_mae, abs=1e-15)
    assert rmse(pred, true) == pytest.approx(expected_rmse, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e3, 1e3)))
def test_rmse_dominates_mae(err):
    assert rmse(err, 0 * err) >= mae(err, 0 * err) - 1e-12


def test_horizon_groups():
    assert horizon_groups(24) == [(0, 8), (8, 16), (16, 24)]
    assert horizon_groups(2) == [(0, 1), (1, 2)]


def test_config_for_rejects_conflicts(small_data):
    with pytest.raises(ValueError, match="window"):
        config_for(small_data, window=12)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(mi_mode="both")
    with pytest.raises(ValueError):
        ModelConfig.from_dict({"hiden": 3})


def test_forward_shapes(model, small_data):
    res, b = forward(model, small_data)
    assert res.y_hat.shape == b.y.shape
    assert res.z_hat.shape == (4, small_data.graph.num_nodes, 3)
    assert res.internals["A_cau"].shape == (4, small_data.graph.num_edges, 2)
    assert res.assignment.mode == "hard"
    test_res = model.forward(b.x, small_data.model_edges(b), "test")
    assert test_res.assignment.mode == "soft"


def test_forward_shape_errors_name_the_input(model, small_data):
    b = small_data["train"].subset(np.arange(2))
    with pytest.raises(ShapeError, match=r"\[input\]"):
        model.forward(b.x[:, :12], small_data.model_edges(b))
    with pytest.raises(ShapeError, match=r"\[edge signal\]"):
        model.forward(b.x, small_data.model_edges(b)[:, :, :4])


@pytest.mark.parametrize("beta", [0.0, 0.1, 2.0])
def test_loss_breakdown_identity(small_data, beta):
    m = CaST(small_data.graph, small_config(small_data, beta=beta))
    res, b = forward(m, small_data)
    _, parts = total_loss(m, res, b.y, m.config)
    assert abs(parts.total - (parts.pre + parts.cod + beta * parts.mi)) <= 1e-10


def test_zero_components_give_zero_total(model):
    cfg = model.config
    B, N, K = 2, model.graph.num_nodes, cfg.codebook_size
    model.codebook.embeddings.data[:] = 0.0
    h = Tensor(np.zeros((B, N, cfg.hidden)))
    idx = np.zeros((B, N), dtype=int)
    total, _, _ = codebook_loss(h, idx, model.codebook, cfg.alpha)
    pre = prediction_loss(np.zeros((B, 3)), np.zeros((B, 3)))
    mi = mi_loss(np.zeros((B, N, K)), np.full((B, N, K), 1.0 / K))
    assert pre.item() + total.item() + cfg.beta * mi.item() == 0.0


def grads_of(model, loss):
    model.zero_grad()
    backward(loss)
    return {name: p.grad is not None and np.any(p.grad != 0) for name, p in model.named_parameters()}


def touched(grads, prefix):
    return any(v for k, v in grads.items() if k.startswith(prefix))


def test_gradient_routing(model, small_data):
    res, b = forward(model, small_data)
    z = res.assignment.z
    g_pre = grads_of(model, prediction_loss(res.y_hat, b.y))
    assert touched(g_pre, "predictor") and touched(g_pre, "disentangler.env")
    assert not touched(g_pre, "codebook") and not touched(g_pre, "classifier")

    res, b = forward(model, small_data)
    _, term1, term2 = codebook_loss(res.internals["H_e"], res.assignment.index, model.codebook, 0.5)
    g1 = grads_of(model, term1)
    assert touched(g1, "codebook") and not touched(g1, "disentangler")
    res, b = forward(model, small_data)
    _, term1, term2 = codebook_loss(res.internals["H_e"], res.assignment.index, model.codebook, 0.5)
    g2 = grads_of(model, term2)
    assert touched(g2, "disentangler.env") and not touched(g2, "codebook")

    res, b = forward(model, small_data)
    g_mi = grads_of(model, mi_loss(z, res.z_hat))
    assert touched(g_mi, "disentangler.ent") and touched(g_mi, "deconfounder")
    assert not touched(g_mi, "classifier") and not touched(g_mi, "predictor")
    assert not touched(g_mi, "disentangler.env") and not touched(g_mi, "codebook")


def test_objective_trains_classifier(model, small_data):
    res, b = forward(model, small_data)
    objective, parts = total_loss(model, res, b.y, model.config)
    full = grads_of(model, objective)
    assert touched(full, "classifier")
    assert parts.classifier > 0


def test_joint_mode_lets_mi_reach_classifier(small_data):
    m = CaST(small_data.graph, small_config(small_data, mi_mode="joint"))
    res, _ = forward(m, small_data)
    assert touched(grads_of(m, mi_loss(res.assignment.z, res.z_hat)), "classifier")


def test_one_epoch_smoke(small_data):
    cfg = small_config(small_data)
    result = Trainer(CaST(small_data.graph, cfg), cfg).fit(small_data)
    assert len(result.history) == 1
    entry = result.history[0]
    assert set(entry) == {"epoch", "train_loss", "val_mae", "val_rmse"}
    assert set(entry["train_loss"]) >= {"L_pre", "L_cod", "L_mi", "total"}
    assert len(result.step_losses) == 3
    assert result.best_epoch == 0


def test_training_is_deterministic(small_data):
    cfg = small_config(small_data, epochs=2)
    runs = [Trainer(CaST(small_data.graph, cfg), cfg).fit(small_data) for _ in range(2)]
    assert np.array(runs[0].step_losses).tobytes() == np.array(runs[1].step_losses).tobytes()
    s0, s1 = runs[0].model.state_dict(), runs[1].model.state_dict()
    assert all(s0[k].tobytes() == s1[k].tobytes() for k in s0)


def test_divergence_reports_batch(small_data):
    cfg = small_config(small_data)
    m = CaST(small_data.graph, cfg)
    m.predictor.layers[-1].bias.data[:] = np.nan
    with pytest.raises(TrainingDiverged, match="batch 0"):
        Trainer(m, cfg).fit(small_data)


def test_early_stopping_and_best_checkpoint(small_data):
    cfg = small_config(small_data, epochs=6, patience=1, lr=0.05)
    result = Trainer(CaST(small_data.graph, cfg), cfg).fit(small_data)
    vals = [h["val_mae"] for h in result.history]
    assert result.best_val_mae == min(vals)
    assert evaluate(result.model, small_data, "val")["mae"] == pytest.approx(min(vals), abs=1e-12)
    if len(vals) < 6:
        assert vals[-1] >= min(vals)


def test_evaluate_reports_horizons(model, small_data):
    report = evaluate(model, small_data, "test")
    assert [h["steps"] for h in report["horizons"]] == ["1-8", "9-16", "17-24"]
    assert report["rmse"] >= report["mae"]
    assert report["mae"] == pytest.approx(np.mean([h["mae"] for h in report["horizons"]]), rel=1e-12)
