"""The bilateral road-segmentation network, training-capable.

Structure mirrors the inference engine's full variant: ResNet-18 stem and
stage 1 on the full-resolution input, stems 1-2 on an asymmetrically
downsampled copy, two depthwise cross-convolution blocks, bilinear
upsampling, a shared 1x1 adjust block, sigmoid spatial attention, and a
two-class 1x1 classifier head. Backbone convolutions carry no bias; every
other convolution does.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _conv_bn_relu(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 1, bias=True),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.down = None
        if stride != 1 or cin != cout:
            self.down = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False),
                nn.BatchNorm2d(cout),
            )

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        s = x if self.down is None else self.down(x)
        return F.relu(y + s)


class Stem(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = nn.Conv2d(3, 64, 7, stride=2, padding=3, bias=False)
        self.bn = nn.BatchNorm2d(64)
        self.pool = nn.MaxPool2d(3, stride=2, padding=1)

    def forward(self, x):
        return self.pool(F.relu(self.bn(self.conv(x))))


class CrossBlock(nn.Module):
    def __init__(self, c=128, row_dilation=1):
        super().__init__()
        self.row = nn.Conv2d(c, c, (1, 5), padding=(0, 2 * row_dilation),
                             dilation=(1, row_dilation), groups=c, bias=True)
        self.col = nn.Conv2d(c, c, (5, 1), padding=(2, 0), groups=c, bias=True)
        self.point = nn.Conv2d(c, c, 1, bias=True)
        self.bn = nn.BatchNorm2d(c)

    def forward(self, x):
        return F.relu(self.bn(self.point(self.col(self.row(x))))) + x


class RoadSeg(nn.Module):
    def __init__(self, csb_ratio=(2, 4)):
        super().__init__()
        self.csb_ratio = tuple(csb_ratio)

        self.sdb_stem = Stem()
        self.sdb_stage1 = nn.Sequential(BasicBlock(64, 64), BasicBlock(64, 64))

        self.csb_stem = Stem()
        self.csb_stage1 = nn.Sequential(BasicBlock(64, 64), BasicBlock(64, 64))
        self.csb_stage2 = nn.Sequential(BasicBlock(64, 128, stride=2), BasicBlock(128, 128))

        self.agg1 = CrossBlock(128, row_dilation=2)
        self.agg2 = CrossBlock(128, row_dilation=1)

        self.adjust = _conv_bn_relu(64, 128)
        self.attn_a = _conv_bn_relu(256, 128)
        self.attn_b = nn.Conv2d(128, 1, 1, bias=True)

        self.head_mid = _conv_bn_relu(128, 128)
        self.head_out = nn.Conv2d(128, 2, 1, bias=True)

    def _resize(self, x, hw):
        if x.shape[2:] == tuple(hw):
            return x
        return F.interpolate(x, size=tuple(hw), mode="bilinear", align_corners=False)

    def forward(self, x, taps=None):
        rv, rh = self.csb_ratio
        h, w = x.shape[2:]

        detail = self.sdb_stage1(self.sdb_stem(x))

        low = self._resize(x, (h // rv, w // rh))
        context = self.csb_stage2(self.csb_stage1(self.csb_stem(low)))

        cross1 = self.agg1(context)
        cross2 = self.agg2(cross1)
        context_up = self._resize(cross2, detail.shape[2:])

        adjusted = self.adjust(detail)
        attention = torch.sigmoid(self.attn_b(self.attn_a(
            torch.cat([adjusted, context_up], dim=1))))
        fused = attention * adjusted + context_up

        logits = self._resize(self.head_out(self.head_mid(fused)), (h, w))
        if taps is not None:
            taps.update(detail=detail, context=context, cross1=cross1, cross2=cross2,
                        context_up=context_up, adjusted=adjusted, attention=attention,
                        fused=fused, logits=logits)
        return logits


def slot_tensors(model: RoadSeg) -> dict[str, torch.Tensor]:
    """Weights keyed by the exchange-manifest slot names."""
    out: dict[str, torch.Tensor] = {}

    def conv(prefix, mod: nn.Conv2d):
        out[f"{prefix}.weight"] = mod.weight
        if mod.bias is not None:
            out[f"{prefix}.bias"] = mod.bias

    def bn(prefix, mod: nn.BatchNorm2d):
        out[f"{prefix}.gamma"] = mod.weight
        out[f"{prefix}.beta"] = mod.bias
        out[f"{prefix}.mean"] = mod.running_mean
        out[f"{prefix}.var"] = mod.running_var

    def stem(prefix, mod: Stem):
        conv(f"{prefix}.stem.conv", mod.conv)
        bn(f"{prefix}.stem.bn", mod.bn)

    def block(prefix, mod: BasicBlock):
        conv(f"{prefix}.conv1", mod.conv1)
        bn(f"{prefix}.bn1", mod.bn1)
        conv(f"{prefix}.conv2", mod.conv2)
        bn(f"{prefix}.bn2", mod.bn2)
        if mod.down is not None:
            conv(f"{prefix}.down.conv", mod.down[0])
            bn(f"{prefix}.down.bn", mod.down[1])

    def stage(prefix, seq):
        block(f"{prefix}.block1", seq[0])
        block(f"{prefix}.block2", seq[1])

    def cbr(prefix, seq):
        conv(f"{prefix}.conv", seq[0])
        bn(f"{prefix}.bn", seq[1])

    def cross(prefix, mod: CrossBlock):
        conv(f"{prefix}.row", mod.row)
        conv(f"{prefix}.col", mod.col)
        conv(f"{prefix}.point", mod.point)
        bn(f"{prefix}.bn", mod.bn)

    stem("sdb", model.sdb_stem)
    stage("sdb.stage1", model.sdb_stage1)
    stem("csb", model.csb_stem)
    stage("csb.stage1", model.csb_stage1)
    stage("csb.stage2", model.csb_stage2)
    cross("agg.block1", model.agg1)
    cross("agg.block2", model.agg2)
    cbr("fuse.adjust", model.adjust)
    cbr("fuse.attn.a", model.attn_a)
    conv("fuse.attn.b", model.attn_b)
    cbr("head.mid", model.head_mid)
    conv("head.out", model.head_out)
    return out


def parameter_count(model: RoadSeg) -> int:
    """Conv weights/biases plus batchnorm affine terms; running stats excluded."""
    total = 0
    for name, tensor in slot_tensors(model).items():
        if not name.endswith((".mean", ".var")):
            total += tensor.numel()
    return total
