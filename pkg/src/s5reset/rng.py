"""Seeded, splittable counter-based random streams (Philox)."""
from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for ``path`` under master ``seed``.

    Path parts may be ints or strings, e.g. ``stream(7, "env", 3)``.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def keys(seed: int, n: int, *path) -> np.ndarray:
    """``n`` uint64 keys for per-row counter streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(p) for p in path))
    return ss.generate_state(n, dtype=np.uint64)


def counter_rng(key, counter) -> np.random.Generator:
    """Generator fully determined by ``(key, counter)``."""
    return np.random.Generator(np.random.Philox(key=np.array([key, counter], dtype=np.uint64)))
