#!/usr/bin/env python3
"""Regenerate the per-variant weight-slot manifests in manifests/.

Each manifest freezes the slot naming scheme (branch.block.layer.kind), the
expected dims of every slot, and the parameter total, so external exporters
can produce .lfdw files without importing this package.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from lfdseg.analysis import count_params
from lfdseg.graph import VARIANTS, VariantConfig, build

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "manifests")

# Slot dims depend only on channel widths, never on the input size.
PROBE_HW = (64, 128)


def manifest(variant: str) -> dict:
    graph = build(VariantConfig(variant, PROBE_HW))
    slots = []
    for name, dims in graph.weight_slots:
        slots.append({
            "name": name,
            "dims": list(dims),
            "elements": math.prod(dims),
            "parameter": not name.endswith((".mean", ".var")),
        })
    return {
        "format": "lfdw",
        "format_version": 1,
        "variant": variant,
        "naming": "branch.block.layer.kind; batchnorm slots gamma/beta/mean/var; "
                   "running statistics are stored but not counted as parameters",
        "param_total": count_params(graph),
        "slot_count": len(slots),
        "slots": slots,
    }


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for variant in VARIANTS:
        path = os.path.join(OUT_DIR, f"{variant}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest(variant), fh, indent=2)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
