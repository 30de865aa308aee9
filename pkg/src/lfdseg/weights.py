"""Binary weight container (.lfdw) and graph binding.

Layout, all little-endian:

    magic "LFDW" | u32 version=1 | u32 entry count
    per entry: u16 name length | name bytes (UTF-8) | u8 dtype (0 = f32)
               | u8 ndim | ndim x u32 dims | raw f32 payload
    trailer: u32 CRC-32 of every preceding byte
"""

from __future__ import annotations

import io
import struct
import zlib

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    BindError,
    ChecksumError,
    TruncatedError,
    UnsupportedDtypeError,
    WeightFormatError,
)
from .graph import BoundModel, ModelGraph

MAGIC = b"LFDW"
VERSION = 1
DTYPE_F32 = 0


class WeightStore:
    """Ordered name -> float32 array map."""

    def __init__(self):
        self._entries: dict[str, np.ndarray] = {}

    def add(self, name: str, data: np.ndarray) -> None:
        if name in self._entries:
            raise WeightFormatError(f"duplicate entry name {name!r}")
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr.ndim < 1:
            arr = arr.reshape(1)
        self._entries[name] = arr

    def get(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __contains__(self, name) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()


def write(store: WeightStore, sink) -> None:
    close = False
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        sink = open(sink, "wb")
        close = True
    try:
        crc = 0

        def put(b: bytes):
            nonlocal crc
            sink.write(b)
            crc = zlib.crc32(b, crc)

        put(MAGIC)
        put(struct.pack("<II", VERSION, len(store)))
        for name, arr in store.items():
            nb = name.encode("utf-8")
            if len(nb) > 0xFFFF:
                raise WeightFormatError(f"entry name too long ({len(nb)} bytes)")
            put(struct.pack("<H", len(nb)))
            put(nb)
            put(struct.pack("<BB", DTYPE_F32, arr.ndim))
            put(struct.pack(f"<{arr.ndim}I", *arr.shape))
            put(arr.astype("<f4", copy=False).tobytes())
        sink.write(struct.pack("<I", crc & 0xFFFFFFFF))
    finally:
        if close:
            sink.close()


def read(source) -> WeightStore:
    if isinstance(source, str) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            blob = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        blob = bytes(source)
    else:
        blob = source.read()
    if len(blob) < 16:
        raise TruncatedError(f"file is {len(blob)} bytes; minimum container is 16")
    body, trailer = blob[:-4], blob[-4:]
    (stated_crc,) = struct.unpack("<I", trailer)
    if zlib.crc32(body) & 0xFFFFFFFF != stated_crc:
        raise ChecksumError("CRC-32 mismatch; file is corrupt")
    if body[:4] != MAGIC:
        raise BadMagicError(f"bad magic {body[:4]!r}; expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise BadVersionError(f"unsupported container version {version}")
    store = WeightStore()
    off = 12
    for i in range(count):
        try:
            (nlen,) = struct.unpack_from("<H", body, off)
            off += 2
            name = body[off:off + nlen].decode("utf-8")
            if len(body[off:off + nlen]) != nlen:
                raise struct.error
            off += nlen
            dtype, ndim = struct.unpack_from("<BB", body, off)
            off += 2
            if dtype != DTYPE_F32:
                raise UnsupportedDtypeError(f"entry {name!r} has unsupported dtype {dtype}")
            dims = struct.unpack_from(f"<{ndim}I", body, off)
            off += 4 * ndim
            n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            raw = body[off:off + 4 * n]
            if len(raw) != 4 * n:
                raise struct.error
            off += 4 * n
        except struct.error:
            raise TruncatedError(f"container truncated inside entry {i}") from None
        store.add(name, np.frombuffer(raw, dtype="<f4").reshape(dims).copy())
    if off != len(body):
        raise WeightFormatError(f"{len(body) - off} trailing bytes after last entry")
    return store


def bind(graph: ModelGraph, store: WeightStore) -> BoundModel:
    slots = {}
    missing, mismatched = [], []
    for name, dims in graph.weight_slots:
        if name not in store:
            missing.append(name)
            continue
        arr = store.get(name)
        if arr.shape != tuple(dims):
            mismatched.append(f"{name} (have {list(arr.shape)}, need {list(dims)})")
            continue
        slots[name] = arr
    if missing or mismatched:
        parts = []
        if missing:
            parts.append("unbound slots: " + ", ".join(missing[:8])
                         + (f" and {len(missing) - 8} more" if len(missing) > 8 else ""))
        if mismatched:
            parts.append("dim mismatches: " + "; ".join(mismatched[:8]))
        raise BindError("; ".join(parts))
    return BoundModel(graph, slots)


def binding_report(graph: ModelGraph, store: WeightStore) -> dict:
    slot_names = {name for name, _ in graph.weight_slots}
    return {
        "unbound": sorted(n for n in slot_names if n not in store),
        "unused": sorted(n for n in store.names() if n not in slot_names),
    }


def random_store(graph: ModelGraph, seed: int = 0, scale: float = 0.05) -> WeightStore:
    """Small random weights with sane batchnorm statistics, for tests."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name, dims in graph.weight_slots:
        if name.endswith(".gamma"):
            arr = np.ones(dims, dtype=np.float32)
        elif name.endswith((".beta", ".mean")):
            arr = np.zeros(dims, dtype=np.float32)
        elif name.endswith(".var"):
            arr = np.ones(dims, dtype=np.float32)
        else:
            arr = rng.normal(0.0, scale, size=dims).astype(np.float32)
        store.add(name, arr)
    return store


def zero_store(graph: ModelGraph) -> WeightStore:
    """All-zero weights with identity batchnorm, for linearity checks."""
    store = WeightStore()
    for name, dims in graph.weight_slots:
        if name.endswith((".gamma", ".var")):
            store.add(name, np.ones(dims, dtype=np.float32))
        else:
            store.add(name, np.zeros(dims, dtype=np.float32))
    return store
