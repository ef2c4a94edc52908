"""Named, reproducible random streams.

Every stochastic step draws from a ``numpy.random.Generator`` (PCG64) built
from the root seed plus a path of names/indices, e.g.
``stream(seed, "repeat", 3, "split")``. Streams with different paths are
statistically independent; the same path always yields the same stream.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream indices must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *path) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *path) -> int:
    """A 63-bit integer seed for the stream at ``path``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
