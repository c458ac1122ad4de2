"""Versioned little-endian binary checkpoints.

Layout (all integers little-endian)::

    b"S5RCKPT\\0"  u32 version
    u32 len, utf-8 JSON metadata (config and its digest)
    u32 field count, then per field:
        u16 len, utf-8 name | u8 len, ascii dtype ("<f8", "<c16", ...)
        u8 ndim | u64 * ndim shape | raw array bytes in C order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"S5RCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    blob = json.dumps(meta, sort_keys=True).encode()
    chunks += [struct.pack("<I", len(blob)), blob, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, order="C")
        dt = arr.dtype.newbyteorder("<")
        arr = arr.astype(dt, copy=False)
        nm, code = name.encode(), dt.str.encode()
        chunks += [struct.pack("<H", len(nm)), nm, struct.pack("<B", len(code)), code,
                   struct.pack("<B", arr.ndim), struct.pack(f"<{arr.ndim}Q", *arr.shape),
                   arr.tobytes()]
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    buf = memoryview(Path(path).read_bytes())
    if bytes(buf[:8]) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint")
    pos = 8

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, buf, pos)
        pos += struct.calcsize(fmt)
        return vals

    (version,) = take("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (n,) = take("<I")
    meta = json.loads(bytes(buf[pos:pos + n]))
    pos += n
    (count,) = take("<I")
    arrays = {}
    for _ in range(count):
        (n,) = take("<H")
        name = bytes(buf[pos:pos + n]).decode()
        pos += n
        (n,) = take("<B")
        dt = np.dtype(bytes(buf[pos:pos + n]).decode())
        pos += n
        (ndim,) = take("<B")
        shape = take(f"<{ndim}Q")
        size = int(np.prod(shape)) * dt.itemsize
        arrays[name] = np.frombuffer(buf[pos:pos + size], dtype=dt).reshape(shape).copy()
        pos += size
    return arrays, meta
