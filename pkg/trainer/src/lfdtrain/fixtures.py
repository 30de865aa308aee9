"""Golden-fixture generation: a trained checkpoint plus its intermediate
activations on one held-out frame, exported in the interchange container so
an independent implementation can replay the forward pass and compare."""

from __future__ import annotations

import json
import os

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .export import export_model, write_lfdw
from .synth import make_scene
from .train import to_tensor

TAP_NAMES = ("detail", "context", "cross1", "cross2", "context_up",
             "adjusted", "attention", "fused", "logits")
TOLERANCE = 1e-4


def generate(model, manifest_path, out_dir, seed: int, scene_index: int,
             hw=(64, 128), csb_ratio=(2, 4)):
    os.makedirs(out_dir, exist_ok=True)
    model.eval()

    img, mask = make_scene(seed, scene_index, hw)
    Image.fromarray(img).save(os.path.join(out_dir, "image.png"))
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(
        os.path.join(out_dir, "mask.png"))

    x = to_tensor(img).unsqueeze(0)
    taps: dict[str, torch.Tensor] = {}
    with torch.no_grad():
        logits = model(x, taps=taps)
        prob = F.softmax(logits, dim=1)[:, 1:2]

    entries = [("input", x.numpy().astype(np.float32))]
    for name in TAP_NAMES:
        entries.append((name, taps[name].numpy().astype(np.float32)))
    entries.append(("prob", prob.numpy().astype(np.float32)))
    write_lfdw(os.path.join(out_dir, "activations.lfdw"), entries)

    export_model(model, manifest_path, os.path.join(out_dir, "weights_full.lfdw"))

    meta = {
        "variant": "full",
        "input_hw": list(hw),
        "csb_ratio": list(csb_ratio),
        "tolerance": TOLERANCE,
        "seed": seed,
        "scene_index": scene_index,
        "generator": "lfdtrain fixtures",
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    readme = (
        "# Golden fixtures\n\n"
        "Produced by the `lfdtrain fixtures` command: a seeded desk-scale\n"
        "training run on procedural road scenes, exported to the .lfdw\n"
        "container together with every intermediate activation for one\n"
        "held-out frame (`image.png`, preprocessed tensor stored as the\n"
        "`input` entry of `activations.lfdw`).\n\n"
        f"Regenerate with:\n\n"
        f"    lfdtrain fixtures --seed {seed} --out <dir>\n\n"
        "The inference engine replays the forward pass from\n"
        "`weights_full.lfdw` and compares each tap at the tolerance recorded\n"
        "in `meta.json`.\n"
    )
    with open(os.path.join(out_dir, "README.md"), "w", encoding="utf-8") as fh:
        fh.write(readme)
    return meta
