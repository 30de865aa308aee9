"""Inference kernels: convolution, normalization, activations, pooling, resize.

Conventions shared by every kernel:
  * float32 in, float32 out, accumulation in float32;
  * convolution is cross-correlation (no kernel flip);
  * output spatial dims follow floor((in + 2p - d*(k-1) - 1) / s) + 1;
  * results are bit-identical for any worker-thread count (fixed work
    decomposition, fixed left-to-right kernel-tap accumulation order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import runtime
from .errors import ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class ConvSpec:
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    dilation: tuple[int, int] = (1, 1)
    groups: int = 1
    bias: bool = True


def conv_out_dim(size: int, k: int, s: int, p: int, d: int) -> int:
    return (size + 2 * p - d * (k - 1) - 1) // s + 1


def conv_out_hw(in_hw: tuple[int, int], spec: ConvSpec) -> tuple[int, int]:
    oh = conv_out_dim(in_hw[0], spec.kernel[0], spec.stride[0], spec.padding[0], spec.dilation[0])
    ow = conv_out_dim(in_hw[1], spec.kernel[1], spec.stride[1], spec.padding[1], spec.dilation[1])
    return oh, ow


def conv2d(x: Tensor, weight: np.ndarray, bias: np.ndarray | None, spec: ConvSpec) -> Tensor:
    n, cin, h, w = x.dims
    if weight.ndim != 4:
        raise ShapeError(f"conv weight must be 4-D, got ndim={weight.ndim}")
    cout, cin_g, kh, kw = weight.shape
    g = spec.groups
    if (kh, kw) != tuple(spec.kernel):
        raise ShapeError(f"weight kernel {kh}x{kw} does not match spec {spec.kernel}")
    if g < 1 or cin % g or cout % g:
        raise ShapeError(f"groups={g} must divide in-channels {cin} and out-channels {cout}")
    if cin_g != cin // g:
        raise ShapeError(f"weight in-channel dim {cin_g} != {cin}//groups={cin // g}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias length {bias.shape} != out-channels {cout}")
    oh, ow = conv_out_hw((h, w), spec)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv output dims {oh}x{ow} degenerate for input {h}x{w}")

    sh, sw = spec.stride
    ph, pw = spec.padding
    dh, dw = spec.dilation
    xd = x.data
    if ph or pw:
        xd = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    wgt = np.ascontiguousarray(weight, dtype=np.float32)
    out = np.empty((n, cout, oh, ow), dtype=np.float32)
    depthwise = g == cin and cout == cin
    cog = cout // g

    items = [(i, y0, y1) for i in range(n) for y0, y1 in runtime.row_blocks(oh)]

    def work(item):
        i, y0, y1 = item
        by = y1 - y0
        acc = np.zeros((cout, by, ow), dtype=np.float32)
        for ki in range(kh):
            r0 = y0 * sh + ki * dh
            r1 = r0 + (by - 1) * sh + 1
            for kj in range(kw):
                c0 = kj * dw
                c1 = c0 + (ow - 1) * sw + 1
                xs = xd[i, :, r0:r1:sh, c0:c1:sw]
                if depthwise:
                    acc += wgt[:, 0, ki, kj][:, None, None] * xs
                elif g == 1:
                    tap = wgt[:, :, ki, kj] @ xs.reshape(cin, by * ow)
                    acc += tap.reshape(cout, by, ow)
                else:
                    for gi in range(g):
                        xg = xs[gi * cin_g:(gi + 1) * cin_g].reshape(cin_g, by * ow)
                        tap = wgt[gi * cog:(gi + 1) * cog, :, ki, kj] @ xg
                        acc[gi * cog:(gi + 1) * cog] += tap.reshape(cog, by, ow)
        if bias is not None:
            acc += bias[:, None, None]
        out[i, :, y0:y1, :] = acc

    runtime.parallel_for(items, work)
    return Tensor(out)


def batchnorm_infer(
    x: Tensor,
    gamma: np.ndarray,
    beta: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    eps: float = 1e-5,
) -> Tensor:
    c = x.c
    for name, v in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if v.shape != (c,):
            raise ShapeError(f"batchnorm {name} length {v.shape} != channels {c}")
    if np.any(var < 0):
        raise ShapeError("batchnorm variance must be non-negative")
    scale = (gamma / np.sqrt(var + np.float32(eps))).astype(np.float32)
    shift = (beta - mean * scale).astype(np.float32)
    return Tensor(x.data * scale[:, None, None] + shift[:, None, None])


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, np.float32(0.0)))


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    out = np.empty_like(xd)
    # Split by sign so exp never overflows.
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor(out)


def softmax_channels(x: Tensor) -> Tensor:
    xd = x.data
    m = xd.max(axis=1, keepdims=True)
    e = np.exp(xd - m)
    return Tensor(e / e.sum(axis=1, keepdims=True))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.dims != b.dims:
        raise ShapeError(f"add requires identical dims, got {a.dims} vs {b.dims}")
    return Tensor(a.data + b.data)


def mul(a: Tensor, b: Tensor) -> Tensor:
    # Single-channel second operand broadcasts across channels (attention mask).
    if a.dims != b.dims and not (
        b.c == 1 and (b.n, b.h, b.w) == (a.n, a.h, a.w)
    ):
        raise ShapeError(f"mul requires identical dims or 1-channel mask, got {a.dims} vs {b.dims}")
    return Tensor(a.data * b.data)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if (a.n, a.h, a.w) != (b.n, b.h, b.w):
        raise ShapeError(f"concat requires matching n/h/w, got {a.dims} vs {b.dims}")
    return Tensor(np.concatenate([a.data, b.data], axis=1))


def maxpool2d(
    x: Tensor,
    kernel: tuple[int, int] = (3, 3),
    stride: tuple[int, int] = (2, 2),
    padding: tuple[int, int] = (1, 1),
) -> Tensor:
    n, c, h, w = x.dims
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    if ph >= kh or pw >= kw:
        raise ShapeError("maxpool padding must be smaller than the kernel")
    oh = conv_out_dim(h, kh, sh, ph, 1)
    ow = conv_out_dim(w, kw, sw, pw, 1)
    if oh < 1 or ow < 1:
        raise ShapeError(f"maxpool output dims {oh}x{ow} degenerate for input {h}x{w}")
    xd = x.data
    if ph or pw:
        # Padded positions must never win the max.
        xd = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=-np.inf)
    out = np.empty((n, c, oh, ow), dtype=np.float32)
    items = [(i, y0, y1) for i in range(n) for y0, y1 in runtime.row_blocks(oh)]

    def work(item):
        i, y0, y1 = item
        by = y1 - y0
        acc = np.full((c, by, ow), -np.inf, dtype=np.float32)
        for ki in range(kh):
            r0 = y0 * sh + ki
            r1 = r0 + (by - 1) * sh + 1
            for kj in range(kw):
                np.maximum(acc, xd[i, :, r0:r1:sh, kj:kj + (ow - 1) * sw + 1:sw], out=acc)
        out[i, :, y0:y1, :] = acc

    runtime.parallel_for(items, work)
    return Tensor(out)


def _resize_axis(in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-center source indices and lerp weights for one axis."""
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = (src - i0).astype(np.float32)
    return i0, i1, frac


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target {out_h}x{out_w} degenerate")
    n, c, h, w = x.dims
    if (out_h, out_w) == (h, w):
        return Tensor(x.data.copy())
    y0, y1, fy = _resize_axis(h, out_h)
    x0, x1, fx = _resize_axis(w, out_w)
    xd = x.data
    r0 = xd[:, :, y0, :]
    r1 = xd[:, :, y1, :]
    fy = fy[None, None, :, None]
    fx = fx[None, None, None, :]
    top = r0[:, :, :, x0] * (1.0 - fx) + r0[:, :, :, x1] * fx
    bot = r1[:, :, :, x0] * (1.0 - fx) + r1[:, :, :, x1] * fx
    return Tensor(top * (1.0 - fy) + bot * fy)
