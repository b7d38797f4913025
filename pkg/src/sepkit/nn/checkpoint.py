"""Flat binary parameter container.

Layout, all integers little-endian u32 unless noted:

    magic   8 bytes  b"SEPKITCP"
    version u32      currently 1
    count   u32      number of tensors
    then per tensor:
      name_len u32, name (UTF-8, name_len bytes)
      rank u32, dims (rank * u32)
      data (prod(dims) * 4 bytes, raw little-endian float32, C order)

Names are arbitrary but must be unique within a file.
"""

from __future__ import annotations

import struct

import numpy as np

from sepkit.errors import BadCheckpoint

MAGIC = b"SEPKITCP"
VERSION = 1


def save_checkpoint(path, named_tensors) -> None:
    """Write name->array pairs; data is cast to float32."""
    items = list(named_tensors.items()) if isinstance(named_tensors, dict) \
        else list(named_tensors)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("duplicate tensor names")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def _take(buf: bytes, pos: int, n: int) -> tuple[bytes, int]:
    if pos + n > len(buf):
        raise BadCheckpoint("truncated checkpoint file")
    return buf[pos:pos + n], pos + n


def load_checkpoint(path) -> dict:
    """Read a checkpoint back as an ordered {name: float32 array} dict."""
    with open(path, "rb") as fh:
        buf = fh.read()
    chunk, pos = _take(buf, 0, len(MAGIC))
    if chunk != MAGIC:
        raise BadCheckpoint(f"{path} is not a parameter checkpoint")
    chunk, pos = _take(buf, pos, 8)
    version, count = struct.unpack("<II", chunk)
    if version != VERSION:
        raise BadCheckpoint(f"unsupported checkpoint version {version}")
    out = {}
    for _ in range(count):
        chunk, pos = _take(buf, pos, 4)
        (name_len,) = struct.unpack("<I", chunk)
        chunk, pos = _take(buf, pos, name_len)
        try:
            name = chunk.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BadCheckpoint("tensor name is not valid UTF-8") from exc
        chunk, pos = _take(buf, pos, 4)
        (rank,) = struct.unpack("<I", chunk)
        chunk, pos = _take(buf, pos, 4 * rank)
        dims = struct.unpack(f"<{rank}I", chunk)
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        chunk, pos = _take(buf, pos, 4 * size)
        if name in out:
            raise BadCheckpoint(f"duplicate tensor name {name!r}")
        out[name] = np.frombuffer(chunk, dtype="<f4").reshape(dims).copy()
    if pos != len(buf):
        raise BadCheckpoint("trailing bytes after the last tensor")
    return out
