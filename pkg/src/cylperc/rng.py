"""Seeded counter-based random streams.

Every stream is a Philox generator keyed by the master seed and a tuple
of names, so replica ``i`` draws the same numbers whether it runs alone,
in a batch, or on another worker.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *names) -> np.random.Generator:
    """Independent generator for the sub-stream ``names`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed_or_rng, *names) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(seed_or_rng, *names)
