"""Conformance self-test: kernel hand cases, the parameter table, container
round-trips, and golden-activation comparison against committed fixtures."""

from __future__ import annotations

import io
import json
import os

import numpy as np

from . import kernels as K
from . import weights as W
from .analysis import count_params
from .errors import ChecksumError, DataError
from .graph import VariantConfig, build
from .kernels import ConvSpec
from .tensor import Tensor

PARAM_TABLE = {
    "sdb": 183_106,
    "csb": 700_098,
    "csb-agg": 736_706,
    "selfuse-noagg": 899_459,
    "concat": 919_170,
    "product": 902_786,
    "add": 902_786,
    "full": 936_067,
    "stage1": 157_634,
    "stage2": 683_330,
    "stage3": 2_783_298,
    "stage4": 11_177_538,
}

GOLDEN_TOLERANCE = 1e-4
GOLDEN_TAPS = ("detail", "context", "cross1", "cross2", "context_up",
               "adjusted", "attention", "fused", "logits")


def _close(a, b, tol):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max()) <= tol


def _kernel_checks():
    ones = Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))
    out = K.conv2d(ones, np.ones((1, 1, 3, 3), np.float32), None,
                   ConvSpec((3, 3), padding=(1, 1)))
    yield "conv 3x3 ones center", float(out.data[0, 0, 1, 1]) == 9.0

    x = Tensor(np.arange(1, 8, dtype=np.float32).reshape(1, 1, 1, 7))
    dil = K.conv2d(x, np.ones((1, 1, 1, 5), np.float32), None,
                   ConvSpec((1, 5), padding=(0, 4), dilation=(1, 2), groups=1))
    yield "conv dilated row taps", dil.w == 7 and float(dil.data[0, 0, 0, 0]) == 9.0

    ident = K.conv2d(x, np.ones((1, 1, 1, 1), np.float32), None, ConvSpec((1, 1)))
    yield "conv 1x1 identity", np.array_equal(ident.data, x.data)

    grid = Tensor(np.arange(1, 17, dtype=np.float32).reshape(1, 1, 4, 4))
    mp = K.maxpool2d(grid, (2, 2), (2, 2), (0, 0))
    yield "maxpool 2x2 grid", np.array_equal(mp.data[0, 0], [[6, 8], [14, 16]])

    rz = K.bilinear_resize(Tensor(np.array([0, 2], np.float32).reshape(1, 1, 1, 2)), 1, 4)
    yield "resize half-pixel row", np.allclose(rz.data[0, 0, 0], [0.0, 0.5, 1.5, 2.0])

    bn = K.batchnorm_infer(Tensor(np.full((1, 1, 1, 1), 3, np.float32)),
                           np.array([2.0], np.float32), np.array([0.0], np.float32),
                           np.array([1.0], np.float32), np.array([3.0], np.float32), eps=1.0)
    yield "batchnorm scalar case", float(bn.data.ravel()[0]) == 2.0

    yield "sigmoid at zero", float(K.sigmoid(Tensor(np.zeros((1, 1, 1, 1), np.float32))).data.ravel()[0]) == 0.5

    sm = K.softmax_channels(Tensor(np.zeros((1, 2, 1, 1), np.float32)))
    yield "softmax equal logits", np.allclose(sm.data.ravel(), [0.5, 0.5])


def _param_checks():
    for variant, want in PARAM_TABLE.items():
        got = count_params(build(VariantConfig(variant, (375, 1240))))
        yield f"params {variant}", got == want


def _roundtrip_checks():
    g = build(VariantConfig("full", (32, 64)))
    store = W.random_store(g, seed=11)
    buf = io.BytesIO()
    W.write(store, buf)
    blob = buf.getvalue()
    back = W.read(blob)
    same = back.names() == store.names() and all(
        np.array_equal(back.get(n), store.get(n)) for n in store.names())
    yield "container round-trip", same

    corrupt = bytearray(blob)
    corrupt[len(corrupt) // 2] ^= 0x5A
    try:
        W.read(bytes(corrupt))
        yield "container corruption detected", False
    except ChecksumError:
        yield "container corruption detected", True


def _golden_checks(fixtures_dir):
    meta_path = os.path.join(fixtures_dir, "meta.json")
    weights_path = os.path.join(fixtures_dir, "weights_full.lfdw")
    acts_path = os.path.join(fixtures_dir, "activations.lfdw")
    for p in (meta_path, weights_path, acts_path):
        if not os.path.exists(p):
            raise DataError(f"fixture file missing: {p}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    tol = float(meta.get("tolerance", GOLDEN_TOLERANCE))
    cfg = VariantConfig(meta["variant"], tuple(meta["input_hw"]), tuple(meta["csb_ratio"]))
    graph = build(cfg)
    model = W.bind(graph, W.read(weights_path))
    acts = W.read(acts_path)

    x = Tensor(acts.get("input"))
    logits, taps = model.forward(x, taps=GOLDEN_TAPS)
    for name in GOLDEN_TAPS:
        if name not in acts:
            yield f"golden {name}", False
            continue
        yield f"golden {name}", _close(taps[name].data, acts.get(name), tol)
    prob = K.softmax_channels(logits).data[:, 1:2]
    yield "golden prob", _close(prob, acts.get("prob"), tol)


def run(fixtures_dir=None) -> list[dict]:
    """Every conformance check as {name, ok}; golden checks only when a
    fixtures directory is supplied."""
    results = []
    suites = [_kernel_checks(), _param_checks(), _roundtrip_checks()]
    if fixtures_dir is not None:
        suites.append(_golden_checks(fixtures_dir))
    for suite in suites:
        for name, ok in suite:
            results.append({"name": name, "ok": bool(ok)})
    return results
