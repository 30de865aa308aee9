"""Export trained weights to the .lfdw interchange container.

The writer here is implemented independently against the published byte
layout (magic, version, count, per-entry name/dtype/dims/f32 payload,
trailing CRC-32); it shares no code with the inference engine. A committed
manifest drives which slots must be present and with what shapes, so an
export that drifts from the contract fails loudly instead of producing a
file the engine would reject or misbind."""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np
import torch

MAGIC = b"LFDW"
VERSION = 1
DTYPE_F32 = 0


class ExportError(RuntimeError):
    pass


def write_lfdw(path, entries):
    """entries: iterable of (name, np.ndarray float32). Order is preserved."""
    entries = list(entries)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<I", len(entries))
    for name, arr in entries:
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        raw = name.encode("utf-8")
        blob += struct.pack("<H", len(raw))
        blob += raw
        blob += struct.pack("<B", DTYPE_F32)
        blob += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<I", d)
        blob += arr.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(blob))


def collect_slots(slots: dict, manifest: dict):
    """Validate a slot dict against a manifest and return ordered entries."""
    want = {s["name"]: tuple(s["dims"]) for s in manifest["slots"]}
    have = {k: tuple(v.shape) for k, v in slots.items()}
    missing = sorted(set(want) - set(have))
    if missing:
        raise ExportError("missing slots: " + ", ".join(missing[:5]))
    extra = sorted(set(have) - set(want))
    if extra:
        raise ExportError("unexpected slots: " + ", ".join(extra[:5]))
    bad = sorted(k for k in want if want[k] != have[k])
    if bad:
        k = bad[0]
        raise ExportError(f"slot {k} has shape {have[k]}, manifest says {want[k]}")
    out = []
    for s in manifest["slots"]:
        t = slots[s["name"]]
        out.append((s["name"], t.detach().cpu().numpy().astype(np.float32)))
    return out


def export_model(model, manifest_path, out_path):
    from .model import slot_tensors

    with open(manifest_path) as f:
        manifest = json.load(f)
    with torch.no_grad():
        entries = collect_slots(slot_tensors(model), manifest)
    write_lfdw(out_path, entries)
    return len(entries)
