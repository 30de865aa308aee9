"""Naive single-threaded reference implementations used as test oracles.

Deliberately slow loop-nest versions with float64 accumulation. Nothing here
is imported by the production kernels; the test suite compares the two.
"""

from __future__ import annotations

import numpy as np

from .kernels import ConvSpec, conv_out_dim


def conv2d_naive(x: np.ndarray, weight: np.ndarray, bias, spec: ConvSpec) -> np.ndarray:
    n, cin, h, w = x.shape
    cout, cin_g, kh, kw = weight.shape
    g = spec.groups
    sh, sw = spec.stride
    ph, pw = spec.padding
    dh, dw = spec.dilation
    oh = conv_out_dim(h, kh, sh, ph, dh)
    ow = conv_out_dim(w, kw, sw, pw, dw)
    cog = cout // g
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    wd = weight.astype(np.float64)
    out = np.zeros((n, cout, oh, ow), dtype=np.float64)
    for i in range(n):
        for co in range(cout):
            gi = co // cog
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(cin_g):
                        for ki in range(kh):
                            for kj in range(kw):
                                iy = oy * sh + ki * dh
                                ix = ox * sw + kj * dw
                                acc += xp[i, gi * cin_g + ci, iy, ix] * wd[co, ci, ki, kj]
                    out[i, co, oy, ox] = acc
            if bias is not None:
                out[i, co] += float(bias[co])
    return out.astype(np.float32)


def maxpool2d_naive(x: np.ndarray, kernel, stride, padding) -> np.ndarray:
    n, c, h, w = x.shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    oh = conv_out_dim(h, kh, sh, ph, 1)
    ow = conv_out_dim(w, kw, sw, pw, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=-np.inf)
    out = np.empty((n, c, oh, ow), dtype=np.float32)
    for i in range(n):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    patch = xp[i, ci, oy * sh:oy * sh + kh, ox * sw:ox * sw + kw]
                    out[i, ci, oy, ox] = patch.max()
    return out


def bilinear_resize_naive(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    n, c, h, w = x.shape
    out = np.empty((n, c, out_h, out_w), dtype=np.float32)
    for oy in range(out_h):
        sy = min(max((oy + 0.5) * h / out_h - 0.5, 0.0), h - 1)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for ox in range(out_w):
            sx = min(max((ox + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = x[:, :, y0, x0] * (1 - fx) + x[:, :, y0, x1] * fx
            bot = x[:, :, y1, x0] * (1 - fx) + x[:, :, y1, x1] * fx
            out[:, :, oy, ox] = top * (1 - fy) + bot * fy
    return out
