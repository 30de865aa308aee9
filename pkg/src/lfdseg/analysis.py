"""Exact complexity accounting and analytic receptive fields.

Counting conventions, chosen to reproduce the published tables exactly:
  * parameters = conv weights + conv biases + batchnorm gamma/beta;
    batchnorm running statistics are weight slots but are NOT parameters;
  * MACs are counted for convolutions only, kh*kw*(cin/groups)*cout*oh*ow;
    batchnorm, activations, pooling, resizing and elementwise ops count zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .graph import ModelGraph, VariantConfig, build

# Slot suffixes that hold batchnorm running statistics, excluded from counts.
_STAT_SUFFIXES = (".mean", ".var")


def _slot_is_param(name: str) -> bool:
    return not name.endswith(_STAT_SUFFIXES)


def count_params(graph: ModelGraph) -> int:
    total = 0
    for name, dims in graph.weight_slots:
        if _slot_is_param(name):
            total += math.prod(dims)
    return total


def param_breakdown(graph: ModelGraph, depth: int = 1) -> dict[str, int]:
    """Parameter totals keyed by the first `depth` segments of the node id."""
    out: dict[str, int] = {}
    for node in graph.nodes:
        key = ".".join(node.id.split(".")[:depth])
        for name, dims in node.weight_slots:
            if _slot_is_param(name):
                out[key] = out.get(key, 0) + math.prod(dims)
    return out


def _node_macs(node) -> int:
    if node.kind != "conv":
        return 0
    spec = node.spec["conv"]
    kh, kw = spec.kernel
    cin = node.spec["cin"]
    cout, oh, ow = node.out_shape
    return kh * kw * (cin // spec.groups) * cout * oh * ow


def count_macs(graph: ModelGraph, input_hw: tuple[int, int] | None = None) -> int:
    if input_hw is not None and tuple(input_hw) != tuple(graph.config.input_hw):
        graph = build(replace(graph.config, input_hw=tuple(input_hw)))
    return sum(_node_macs(n) for n in graph.nodes)


def macs_breakdown(graph: ModelGraph, depth: int = 1) -> dict[str, int]:
    out: dict[str, int] = {}
    for node in graph.nodes:
        m = _node_macs(node)
        if m:
            key = ".".join(node.id.split(".")[:depth])
            out[key] = out.get(key, 0) + m
    return out


@dataclass(frozen=True)
class ReceptiveField:
    rf_h: float
    rf_w: float
    jump_h: float
    jump_w: float


def _compose_axis(rf, jump, k, s, d):
    return rf + (k - 1) * d * jump, jump * s


def receptive_field(graph: ModelGraph, node_id: str) -> ReceptiveField:
    """Receptive field of one activation of `node_id`, in input-image pixels.

    Resize layers are modelled as 2-tap interpolators: the jump scales by
    in/out and the extent grows by one source step. A same-size resize is a
    passthrough.
    """
    target = graph.tap_node(node_id).id
    fields: dict[str, ReceptiveField] = {}
    for node in graph.nodes:
        if node.kind == "input":
            fields[node.id] = ReceptiveField(1.0, 1.0, 1.0, 1.0)
            continue
        srcs = [fields[s] for s in node.inputs]
        if node.kind in ("conv", "maxpool"):
            f = srcs[0]
            if node.kind == "conv":
                spec = node.spec["conv"]
                k, s, d = spec.kernel, spec.stride, spec.dilation
            else:
                k, s, d = node.spec["kernel"], node.spec["stride"], (1, 1)
            rh, jh = _compose_axis(f.rf_h, f.jump_h, k[0], s[0], d[0])
            rw, jw = _compose_axis(f.rf_w, f.jump_w, k[1], s[1], d[1])
            fields[node.id] = ReceptiveField(rh, rw, jh, jw)
        elif node.kind == "resize":
            f = srcs[0]
            in_node = graph.node(node.inputs[0])
            ih, iw = in_node.out_shape[1:]
            oh, ow = node.spec["out_hw"]
            rh, jh = f.rf_h, f.jump_h
            rw, jw = f.rf_w, f.jump_w
            if oh != ih:
                rh, jh = rh + jh, jh * (ih / oh)
            if ow != iw:
                rw, jw = rw + jw, jw * (iw / ow)
            fields[node.id] = ReceptiveField(rh, rw, jh, jw)
        else:
            # Pointwise / merge: the union of the operand fields.
            fields[node.id] = ReceptiveField(
                max(f.rf_h for f in srcs),
                max(f.rf_w for f in srcs),
                max(f.jump_h for f in srcs),
                max(f.jump_w for f in srcs),
            )
        if node.id == target:
            return fields[node.id]
    return fields[target]


def analyze(config: VariantConfig) -> dict:
    """Full analysis record for one variant at one input size."""
    graph = build(config)
    record = {
        "variant": config.variant,
        "input_hw": list(config.input_hw),
        "csb_ratio": list(config.csb_ratio),
        "params": count_params(graph),
        "macs": count_macs(graph),
        "param_breakdown": param_breakdown(graph, depth=1),
        "macs_breakdown": macs_breakdown(graph, depth=1),
        "receptive_fields": {},
        "tap_shapes": {},
    }
    for tap in ("detail", "context", "context_up", "backbone"):
        if tap in graph.taps:
            rf = receptive_field(graph, tap)
            record["receptive_fields"][tap] = {
                "rf_h": rf.rf_h, "rf_w": rf.rf_w,
                "jump_h": rf.jump_h, "jump_w": rf.jump_w,
            }
            record["tap_shapes"][tap] = list(graph.tap_node(tap).out_shape)
    return record
