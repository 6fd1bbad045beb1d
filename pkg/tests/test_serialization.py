import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cast_stg.checkpoint import load_checkpoint, save_checkpoint
from cast_stg.data import regime_shift
from cast_stg.model import CaST
from cast_stg.serialization import (CheckpointError, dumps, format_float, read_container,
                                    write_container)
from cast_stg.training import Trainer, config_for, evaluate

from helpers import forecast_data, shrink


@settings(max_examples=300, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trips_exactly(x):
    text = format_float(x)
    assert float(text) == x
    assert len(text.lstrip("-").split("e")[0].replace(".", "").strip("0")) <= 17


def test_float_formatting_uses_17_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(3.0) == "3.0"
    assert format_float(float("nan")) == "NaN"


def test_dumps_is_valid_sorted_json():
    obj = {"b": [1, 2.5, None, True], "a": {"y": np.float64(0.1), "x": np.int64(3)}, "c": np.arange(2.0)}
    text = dumps(obj)
    assert json.loads(text) == {"a": {"x": 3, "y": 0.1}, "b": [1, 2.5, None, True], "c": [0.0, 1.0]}
    assert text.index('"a"') < text.index('"b"')
    assert dumps(obj, indent=None) == dumps(obj, indent=None)


def test_container_round_trip(tmp_path):
    arrays = {"w": np.random.default_rng(0).normal(size=(3, 4)), "s": np.array(2.5), "e": np.zeros((0, 2))}
    write_container(tmp_path / "c.bin", {"k": 1}, arrays)
    meta, back = read_container(tmp_path / "c.bin")
    assert meta == {"k": 1}
    for k, v in arrays.items():
        assert back[k].shape == v.shape
        assert back[k].tobytes() == v.tobytes()


@pytest.mark.parametrize("damage", ["magic", "truncate", "version"])
def test_container_rejects_damaged_files(tmp_path, damage):
    path = tmp_path / "c.bin"
    write_container(path, {}, {"w": np.ones(10)})
    raw = bytearray(path.read_bytes())
    if damage == "magic":
        raw[0:1] = b"X"
    elif damage == "truncate":
        raw = raw[:-16]
    else:
        raw[8] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        read_container(path)


def test_missing_checkpoint_is_a_checkpoint_error(tmp_path):
    with pytest.raises(CheckpointError):
        read_container(tmp_path / "absent.bin")


@pytest.fixture(scope="module")
def trained():
    data, _ = forecast_data(regime_shift(seed=2, length=420))
    data = shrink(data, train=8, val=4, test=4)
    cfg = config_for(data, hidden=5, codebook_size=3, pos_dim=2, batch_size=4, epochs=1)
    return data, Trainer(CaST(data.graph, cfg), cfg).fit(data)


def test_checkpoint_restores_model_and_optimizer(tmp_path, trained):
    data, result = trained
    path = tmp_path / "m.bin"
    save_checkpoint(path, result.model, result.optimizer, data.normalizer, data.edge_config)
    ckpt = load_checkpoint(path)
    assert ckpt.model.config == result.model.config
    assert evaluate(ckpt.model, data, "test") == evaluate(result.model, data, "test")
    np.testing.assert_array_equal(ckpt.model.codebook.usage, result.model.codebook.usage)
    assert ckpt.optimizer.state.step == result.optimizer.state.step
    for name, m in result.optimizer.state.m.items():
        assert ckpt.optimizer.state.m[name].tobytes() == m.tobytes()
    assert ckpt.normalizer.mean.tobytes() == data.normalizer.mean.tobytes()
    assert ckpt.edge_config == data.edge_config


def test_checkpoint_bytes_are_reproducible(tmp_path, trained):
    data, result = trained
    for name in ("a.bin", "b.bin"):
        save_checkpoint(tmp_path / name, result.model, result.optimizer, data.normalizer, data.edge_config)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
