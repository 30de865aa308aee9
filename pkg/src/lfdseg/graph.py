"""Model graphs: declarative variant construction and execution.

The network family is a bilateral road-segmentation model. A high-resolution
detail branch (ResNet-18 stem + stage 1) meets a low-resolution context
branch (asymmetrically downsampled input through ResNet-18 stems 1-2), the
context is refined by two depthwise cross-convolution blocks, upsampled, and
fused with the detail features under a sigmoid spatial attention gate before
a two-class pixel classifier.

Every variant the engine supports is built here, with exact shapes computed
at construction time so parameter and MACs accounting never needs to run the
network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import BindError, GraphBuildError, ShapeError
from .kernels import ConvSpec
from .tensor import Tensor

VARIANTS = (
    "full",
    "sdb",
    "csb",
    "csb-agg",
    "selfuse-noagg",
    "concat",
    "product",
    "add",
    "stage1",
    "stage2",
    "stage3",
    "stage4",
)

BN_EPS = 1e-5

# ResNet-18 stage widths, indexed by stage number.
_STAGE_CHANNELS = {1: 64, 2: 128, 3: 256, 4: 512}


@dataclass(frozen=True)
class VariantConfig:
    variant: str = "full"
    input_hw: tuple[int, int] = (375, 1240)
    csb_ratio: tuple[int, int] = (2, 4)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise GraphBuildError(
                f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"
            )
        h, w = self.input_hw
        if h < 1 or w < 1:
            raise GraphBuildError(f"input size {h}x{w} must be positive")
        rv, rh = self.csb_ratio
        if rv < 1 or rh < 1:
            raise GraphBuildError(f"context downsample ratio {rv}x{rh} must be >= 1")


@dataclass(frozen=True)
class LayerNode:
    id: str
    kind: str
    spec: dict
    inputs: tuple[str, ...]
    out_shape: tuple[int, int, int]  # (c, h, w); batch dim is free
    weight_slots: tuple[tuple[str, tuple[int, ...]], ...] = ()


@dataclass
class ModelGraph:
    config: VariantConfig
    nodes: tuple[LayerNode, ...] = ()
    taps: dict = field(default_factory=dict)  # friendly name -> node id
    output_id: str = ""

    def __post_init__(self):
        self.by_id = {n.id: n for n in self.nodes}

    def node(self, node_id: str) -> LayerNode:
        try:
            return self.by_id[node_id]
        except KeyError:
            raise GraphBuildError(f"no node named {node_id!r} in this graph") from None

    def tap_node(self, name: str) -> LayerNode:
        if name in self.taps:
            return self.by_id[self.taps[name]]
        if name in self.by_id:
            return self.by_id[name]
        known = ", ".join(sorted(self.taps))
        raise GraphBuildError(f"unknown tap {name!r}; taps here: {known}")

    @property
    def weight_slots(self) -> list[tuple[str, tuple[int, ...]]]:
        out = []
        for n in self.nodes:
            out.extend(n.weight_slots)
        return out


class _Builder:
    def __init__(self, config: VariantConfig):
        self.config = config
        self.nodes: list[LayerNode] = []
        self.taps: dict[str, str] = {}
        self.shapes: dict[str, tuple[int, int, int]] = {}

    def emit(self, node_id, kind, spec, inputs, out_shape, slots=()) -> str:
        c, h, w = out_shape
        if h < 1 or w < 1 or c < 1:
            raise GraphBuildError(
                f"layer {node_id!r} produces degenerate dims {c}x{h}x{w}; "
                f"input size {self.config.input_hw} is too small for this variant"
            )
        self.nodes.append(LayerNode(node_id, kind, spec, tuple(inputs), out_shape, tuple(slots)))
        self.shapes[node_id] = out_shape
        return node_id

    def input(self, hw) -> str:
        return self.emit("input", "input", {}, (), (3, hw[0], hw[1]))

    def conv(self, node_id, src, cout, kernel, stride=(1, 1), padding=(0, 0),
             dilation=(1, 1), groups=1, bias=True) -> str:
        cin, h, w = self.shapes[src]
        spec = ConvSpec(kernel, stride, padding, dilation, groups, bias)
        oh, ow = K.conv_out_hw((h, w), spec)
        slots = [(f"{node_id}.weight", (cout, cin // groups, *kernel))]
        if bias:
            slots.append((f"{node_id}.bias", (cout,)))
        return self.emit(node_id, "conv", {"conv": spec, "cin": cin, "cout": cout},
                         (src,), (cout, oh, ow), slots)

    def bn(self, node_id, src) -> str:
        c, h, w = self.shapes[src]
        slots = [(f"{node_id}.{k}", (c,)) for k in ("gamma", "beta", "mean", "var")]
        return self.emit(node_id, "bn", {"channels": c, "eps": BN_EPS}, (src,), (c, h, w), slots)

    def act(self, node_id, kind, src) -> str:
        return self.emit(node_id, kind, {}, (src,), self.shapes[src])

    def maxpool(self, node_id, src, kernel=(3, 3), stride=(2, 2), padding=(1, 1)) -> str:
        c, h, w = self.shapes[src]
        oh = K.conv_out_dim(h, kernel[0], stride[0], padding[0], 1)
        ow = K.conv_out_dim(w, kernel[1], stride[1], padding[1], 1)
        return self.emit(node_id, "maxpool",
                         {"kernel": kernel, "stride": stride, "padding": padding},
                         (src,), (c, oh, ow))

    def resize(self, node_id, src, out_hw) -> str:
        c = self.shapes[src][0]
        return self.emit(node_id, "resize", {"out_hw": tuple(out_hw)},
                         (src,), (c, out_hw[0], out_hw[1]))

    def merge(self, node_id, kind, a, b) -> str:
        ca, ha, wa = self.shapes[a]
        cb, hb, wb = self.shapes[b]
        if (ha, wa) != (hb, wb):
            raise GraphBuildError(f"layer {node_id!r}: operands {ha}x{wa} vs {hb}x{wb} differ")
        if kind == "concat":
            c = ca + cb
        else:
            if kind == "mul" and cb == 1:
                c = ca
            elif ca != cb:
                raise GraphBuildError(f"layer {node_id!r}: channel mismatch {ca} vs {cb}")
            else:
                c = ca
        return self.emit(node_id, kind, {}, (a, b), (c, ha, wa))

    def tap(self, name, node_id):
        self.taps[name] = node_id

    # -- composites ---------------------------------------------------------

    def conv_bn_relu(self, prefix, src, cout, kernel, stride=(1, 1), padding=(0, 0),
                     dilation=(1, 1), groups=1, bias=True) -> str:
        c = self.conv(f"{prefix}.conv", src, cout, kernel, stride, padding, dilation, groups, bias)
        b = self.bn(f"{prefix}.bn", c)
        return self.act(f"{prefix}.relu", "relu", b)

    def stem(self, prefix, src) -> str:
        c = self.conv(f"{prefix}.stem.conv", src, 64, (7, 7), (2, 2), (3, 3), bias=False)
        b = self.bn(f"{prefix}.stem.bn", c)
        r = self.act(f"{prefix}.stem.relu", "relu", b)
        return self.maxpool(f"{prefix}.stem.pool", r)

    def basic_block(self, prefix, src, cout, stride) -> str:
        cin = self.shapes[src][0]
        c1 = self.conv(f"{prefix}.conv1", src, cout, (3, 3), (stride, stride), (1, 1), bias=False)
        b1 = self.bn(f"{prefix}.bn1", c1)
        r1 = self.act(f"{prefix}.relu1", "relu", b1)
        c2 = self.conv(f"{prefix}.conv2", r1, cout, (3, 3), (1, 1), (1, 1), bias=False)
        b2 = self.bn(f"{prefix}.bn2", c2)
        shortcut = src
        if stride != 1 or cin != cout:
            sc = self.conv(f"{prefix}.down.conv", src, cout, (1, 1), (stride, stride), bias=False)
            shortcut = self.bn(f"{prefix}.down.bn", sc)
        s = self.merge(f"{prefix}.add", "add", b2, shortcut)
        return self.act(f"{prefix}.relu2", "relu", s)

    def stage(self, prefix, src, n, cout, first_stride) -> str:
        x = self.basic_block(f"{prefix}.stage{n}.block1", src, cout, first_stride)
        return self.basic_block(f"{prefix}.stage{n}.block2", x, cout, 1)

    def cross_block(self, prefix, src, row_dilation) -> str:
        c = self.shapes[src][0]
        dw = row_dilation
        row = self.conv(f"{prefix}.row", src, c, (1, 5), padding=(0, 2 * dw),
                        dilation=(1, dw), groups=c)
        col = self.conv(f"{prefix}.col", row, c, (5, 1), padding=(2, 0), groups=c)
        pw = self.conv(f"{prefix}.point", col, c, (1, 1))
        b = self.bn(f"{prefix}.bn", pw)
        r = self.act(f"{prefix}.relu", "relu", b)
        return self.merge(f"{prefix}.add", "add", r, src)

    def classifier(self, src, classes=2) -> str:
        mid = self.conv_bn_relu("head.mid", src, 128, (1, 1))
        return self.conv("head.out", mid, classes, (1, 1))

    def adjust(self, src) -> str:
        return self.conv_bn_relu("fuse.adjust", src, 128, (1, 1))

    def fusion_attention(self, adjusted, context_up) -> str:
        cat = self.merge("fuse.cat", "concat", adjusted, context_up)
        inner = self.conv_bn_relu("fuse.attn.a", cat, 128, (1, 1))
        outer = self.conv("fuse.attn.b", inner, 1, (1, 1))
        return self.act("fuse.attn.sigmoid", "sigmoid", outer)

    def finish(self, last, out_hw) -> ModelGraph:
        if self.shapes[last][1:] == tuple(out_hw):
            out = last
        else:
            out = self.resize("out.resize", last, out_hw)
        self.tap("logits", out)
        g = ModelGraph(self.config, tuple(self.nodes), dict(self.taps), out)
        return g


def _csb_backbone(b: _Builder, src: str) -> str:
    h, w = b.shapes[src][1:]
    rv, rh = b.config.csb_ratio
    low = b.resize("csb.resize", src, (h // rv, w // rh))
    b.tap("csb_input", low)
    x = b.stem("csb", low)
    x = b.stage("csb", x, 1, 64, 1)
    x = b.stage("csb", x, 2, 128, 2)
    b.tap("context", x)
    return x


def _aggregate(b: _Builder, src: str) -> str:
    x = b.cross_block("agg.block1", src, row_dilation=2)
    b.tap("cross1", x)
    x = b.cross_block("agg.block2", x, row_dilation=1)
    b.tap("cross2", x)
    return x


def _sdb_backbone(b: _Builder, src: str) -> str:
    x = b.stem("sdb", src)
    x = b.stage("sdb", x, 1, 64, 1)
    b.tap("detail", x)
    return x


def build(config: VariantConfig) -> ModelGraph:
    b = _Builder(config)
    hw = config.input_hw
    x = b.input(hw)
    v = config.variant

    if v.startswith("stage"):
        k = int(v[5:])
        y = b.stem("sdb", x)
        for n in range(1, k + 1):
            y = b.stage("sdb", y, n, _STAGE_CHANNELS[n], 1 if n == 1 else 2)
        b.tap("backbone", y)
        y = b.conv("probe.out", y, 2, (1, 1))
        return b.finish(y, hw)

    if v == "sdb":
        y = _sdb_backbone(b, x)
        y = b.adjust(y)
        b.tap("adjusted", y)
        y = b.classifier(y)
        return b.finish(y, hw)

    if v == "csb":
        y = _csb_backbone(b, x)
        y = b.classifier(y)
        return b.finish(y, hw)

    if v == "csb-agg":
        y = _csb_backbone(b, x)
        y = _aggregate(b, y)
        y = b.classifier(y)
        return b.finish(y, hw)

    detail = _sdb_backbone(b, x)
    context = _csb_backbone(b, x)
    if v != "selfuse-noagg":
        context = _aggregate(b, context)
    up = b.resize("agg.up", context, b.shapes[detail][1:])
    b.tap("context_up", up)
    adjusted = b.adjust(detail)
    b.tap("adjusted", adjusted)

    if v in ("full", "selfuse-noagg"):
        att = b.fusion_attention(adjusted, up)
        b.tap("attention", att)
        gated = b.merge("fuse.mul", "mul", adjusted, att)
        fused = b.merge("fuse.add", "add", gated, up)
    elif v == "concat":
        fused = b.merge("fuse.cat", "concat", adjusted, up)
    elif v == "product":
        fused = b.merge("fuse.mul", "mul", adjusted, up)
    else:  # add
        fused = b.merge("fuse.add", "add", adjusted, up)
    b.tap("fused", fused)
    y = b.classifier(fused)
    return b.finish(y, hw)


# -- execution ---------------------------------------------------------------


class BoundModel:
    """A graph plus resolved weight arrays, ready to run."""

    def __init__(self, graph: ModelGraph, slots: dict):
        self.graph = graph
        self.slots = slots

    def forward(self, x: Tensor, taps=(), overrides=None):
        return _execute(self.graph, self.slots, x, taps, overrides)


def _execute(graph: ModelGraph, slots: dict, x: Tensor, taps=(), overrides=None):
    cfg_c, cfg_h, cfg_w = graph.node("input").out_shape
    if (x.c, x.h, x.w) != (cfg_c, cfg_h, cfg_w):
        raise ShapeError(
            f"input dims {x.c}x{x.h}x{x.w} do not match graph input {cfg_c}x{cfg_h}x{cfg_w}"
        )
    overrides = overrides or {}
    tap_ids = {graph.taps.get(t, t) for t in taps}
    want = dict.fromkeys(tap_ids & set(graph.by_id), None)

    # Reference counts so activations are dropped as soon as possible.
    pending = {}
    for n in graph.nodes:
        for src in n.inputs:
            pending[src] = pending.get(src, 0) + 1
    pending[graph.output_id] = pending.get(graph.output_id, 0) + 1
    for t in want:
        pending[t] = pending.get(t, 0) + 1

    acts: dict[str, Tensor] = {}

    def fetch(name):
        return acts[name]

    def release(names):
        for name in names:
            pending[name] -= 1
            if pending[name] == 0:
                del acts[name]

    for node in graph.nodes:
        nid = node.id
        if nid in overrides:
            out = overrides[nid]
        elif node.kind == "input":
            out = x
        else:
            ins = [fetch(s) for s in node.inputs]
            out = _run_node(node, ins, slots)
        acts[nid] = out
        if nid in want:
            want[nid] = out
        release(node.inputs)

    result = acts[graph.output_id]
    if taps:
        named = {}
        for t in taps:
            nid = graph.taps.get(t, t)
            if want.get(nid) is None:
                raise GraphBuildError(f"unknown tap {t!r}")
            named[t] = want[nid]
        return result, named
    return result


def _run_node(node: LayerNode, ins: list, slots: dict) -> Tensor:
    kind = node.kind
    if kind == "conv":
        w = slots[f"{node.id}.weight"]
        bias = slots.get(f"{node.id}.bias")
        return K.conv2d(ins[0], w, bias, node.spec["conv"])
    if kind == "bn":
        s = slots
        return K.batchnorm_infer(ins[0], s[f"{node.id}.gamma"], s[f"{node.id}.beta"],
                                 s[f"{node.id}.mean"], s[f"{node.id}.var"],
                                 eps=node.spec["eps"])
    if kind == "relu":
        return K.relu(ins[0])
    if kind == "sigmoid":
        return K.sigmoid(ins[0])
    if kind == "softmax":
        return K.softmax_channels(ins[0])
    if kind == "maxpool":
        sp = node.spec
        return K.maxpool2d(ins[0], sp["kernel"], sp["stride"], sp["padding"])
    if kind == "resize":
        oh, ow = node.spec["out_hw"]
        return K.bilinear_resize(ins[0], oh, ow)
    if kind == "add":
        return K.add(ins[0], ins[1])
    if kind == "mul":
        a, bm = ins
        if bm.c == 1 and a.c != 1:
            return K.mul(a, bm)
        if a.c == 1 and bm.c != 1:
            return K.mul(bm, a)
        return K.mul(a, bm)
    if kind == "concat":
        return K.concat_channels(ins[0], ins[1])
    raise GraphBuildError(f"node {node.id!r} has unknown kind {kind!r}")


def forward(graph: ModelGraph, store, x: Tensor, taps=(), overrides=None):
    from .weights import bind

    return bind(graph, store).forward(x, taps=taps, overrides=overrides)
