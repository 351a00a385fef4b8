"""Counter-based random streams: one independent Philox stream per (seed, path)."""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "MOMENTFIELD_SEED"
DEFAULT_SEED = 12345


def default_seed() -> int:
    """Seed from ``MOMENTFIELD_SEED`` if set, else a fixed default."""
    v = os.environ.get(SEED_ENV)
    return int(v) if v not in (None, "") else DEFAULT_SEED


def path_generator(seed: int, path: int, stream: int = 0) -> np.random.Generator:
    """Generator for path ``path``; identical arguments give identical streams.

    The Philox key is ``(seed, path)`` and ``stream`` offsets the counter, so
    streams never overlap and can be created in any order or in parallel.
    """
    if seed < 0 or path < 0:
        raise ValueError("seed and path index must be non-negative")
    bg = np.random.Philox(key=np.array([seed, path], dtype=np.uint64), counter=np.array([0, 0, stream, 0], dtype=np.uint64))
    return np.random.Generator(bg)
