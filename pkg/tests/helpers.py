"""Shared builders for gradient checks and small datasets."""
from __future__ import annotations

import numpy as np

from cast_stg.autodiff import functional as Fn
from cast_stg.autodiff import ops
from cast_stg.autodiff.nn import parameter
from cast_stg.data import DatasetManifest, make_windows
from cast_stg.data.synthetic import synthesize_ood


def away_from_zero(rng, shape, margin=0.2):
    """Random values with |x| >= margin, so kinks of relu/abs/clamp are not sampled."""
    x = rng.uniform(margin, 1.5, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def _unary(fn, positive=False, kinked=False):
    def build(rng):
        shape = (3, 4)
        if positive:
            data = rng.uniform(0.3, 2.0, size=shape)
        elif kinked:
            data = away_from_zero(rng, shape)
        else:
            data = rng.normal(size=shape)
        x = parameter(data)
        return (lambda: fn(x)), [x]
    return build


def _binary(fn, positive_b=False):
    def build(rng):
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.uniform(0.5, 2.0, size=(4,)) if positive_b else rng.normal(size=(4,)))
        return (lambda: fn(a, b)), [a, b]
    return build


def _matmul(rng):
    a = parameter(rng.normal(size=(2, 3, 4)))
    b = parameter(rng.normal(size=(4, 5)))
    return (lambda: ops.matmul(a, b)), [a, b]


def _reduce(fn):
    def build(rng):
        x = parameter(rng.normal(size=(3, 4, 2)))
        return (lambda: fn(x)), [x]
    return build


def _max(rng):
    # distinct entries so the arg max is unique
    x = parameter(rng.permutation(24).reshape(3, 4, 2) * 0.3 + rng.uniform(0, 0.01, size=(3, 4, 2)))
    return (lambda: ops.max(x, axis=1)), [x]


def _getitem(rng):
    x = parameter(rng.normal(size=(4, 5)))
    return (lambda: ops.getitem(x, (slice(1, 3), [0, 2, 2]))), [x]


def _take(rng):
    x = parameter(rng.normal(size=(5, 3)))
    idx = np.array([[0, 4], [4, 1], [2, 2]])
    return (lambda: ops.take(x, idx, axis=0)), [x]


def _concat(rng):
    a = parameter(rng.normal(size=(2, 3)))
    b = parameter(rng.normal(size=(2, 2)))
    return (lambda: ops.concat([a, b], axis=-1)), [a, b]


def _stack(rng):
    a = parameter(rng.normal(size=(2, 3)))
    b = parameter(rng.normal(size=(2, 3)))
    return (lambda: ops.stack([a, b], axis=1)), [a, b]


def _conv1d(rng):
    x = parameter(rng.normal(size=(2, 3, 9)))
    w = parameter(rng.normal(size=(4, 3, 2)))
    b = parameter(rng.normal(size=(4,)))
    dilation = int(rng.integers(1, 4))
    return (lambda: Fn.conv1d(x, w, b, dilation=dilation)), [x, w, b]


def _dft(rng):
    x = parameter(rng.normal(size=(2, 6)))
    return (lambda: ops.concat(list(Fn.dft(x)), axis=-1)), [x]


def _idft(rng):
    re = parameter(rng.normal(size=(2, 6)))
    im = parameter(rng.normal(size=(2, 6)))
    return (lambda: ops.concat(list(Fn.idft(re, im)), axis=-1)), [re, im]


def _layer_norm(rng):
    x = parameter(rng.normal(size=(3, 5)))
    g = parameter(rng.normal(size=(5,)))
    b = parameter(rng.normal(size=(5,)))
    return (lambda: Fn.layer_norm(x, g, b)), [x, g, b]


def _attention(rng):
    q = parameter(rng.normal(size=(2, 4, 3)))
    k = parameter(rng.normal(size=(2, 4, 3)))
    v = parameter(rng.normal(size=(2, 4, 3)))
    return (lambda: Fn.attention(q, k, v)[0]), [q, k, v]


GRAD_CASES = {
    "add": _binary(ops.add),
    "sub": _binary(ops.sub),
    "mul": _binary(ops.mul),
    "div": _binary(ops.div, positive_b=True),
    "neg": _unary(ops.neg),
    "power": _unary(lambda x: ops.power(x, 2.5), positive=True),
    "exp": _unary(ops.exp),
    "log": _unary(ops.log, positive=True),
    "sqrt": _unary(ops.sqrt, positive=True),
    "abs": _unary(ops.abs, kinked=True),
    "relu": _unary(ops.relu, kinked=True),
    "sigmoid": _unary(ops.sigmoid),
    "tanh": _unary(ops.tanh),
    "clamp": _unary(lambda x: ops.clamp(x, -0.8, 0.8), kinked=True),
    "matmul": _matmul,
    "sum": _reduce(lambda x: ops.sum(x, axis=(0, 2))),
    "mean": _reduce(lambda x: ops.mean(x, axis=1, keepdims=True)),
    "max": _max,
    "reshape": _reduce(lambda x: ops.reshape(x, (4, 6))),
    "transpose": _reduce(lambda x: ops.transpose(x, (2, 0, 1))),
    "swapaxes": _reduce(lambda x: ops.swapaxes(x, 0, 2)),
    "getitem": _getitem,
    "take": _take,
    "concat": _concat,
    "stack": _stack,
    "softmax": _reduce(lambda x: ops.softmax(x, axis=1)),
    "log_softmax": _reduce(lambda x: ops.log_softmax(x, axis=-1)),
    "conv1d": _conv1d,
    "dft": _dft,
    "idft": _idft,
    "layer_norm": _layer_norm,
    "attention": _attention,
}


def weighted(fn, rng):
    """Multiply an op's output by fixed random weights so that summing it is not degenerate."""
    sample = fn().data
    w = rng.normal(size=sample.shape)
    return lambda: fn() * w


def manifest_like(scenario, **kw) -> DatasetManifest:
    return DatasetManifest(name=scenario.name, signal="-", edges="-", coords="-", split=list(scenario.split),
                           window=scenario.window, horizon=scenario.horizon, tau=scenario.tau, **kw)


def forecast_data(scenario):
    synth = synthesize_ood(scenario)
    return make_windows(synth.dataset, manifest_like(scenario)), synth


def random_graph(rng, num_nodes, num_edges=None):
    """Random oriented simple graph: distinct unordered pairs, each with a random direction."""
    from cast_stg.topology import STGraph

    pairs = [(i, j) for i in range(num_nodes) for j in range(i + 1, num_nodes)]
    if num_edges is None:
        num_edges = int(rng.integers(1, len(pairs) + 1))
    chosen = rng.choice(len(pairs), size=min(num_edges, len(pairs)), replace=False)
    edges = []
    for k in chosen:
        i, j = pairs[k]
        edges.append((i, j) if rng.random() < 0.5 else (j, i))
    coords = rng.uniform(0.0, 10.0, size=(num_nodes, 2))
    return STGraph(num_nodes, tuple(edges), coords)


def shrink(data, train=None, val=None, test=None):
    """Copy of ``data`` keeping only the first few windows of each split."""
    from dataclasses import replace

    keep = {"train": train, "val": val, "test": test}
    splits = {k: (b if keep[k] is None else b.subset(np.arange(min(keep[k], len(b)))))
              for k, b in data.splits.items()}
    return replace(data, splits=splits)
