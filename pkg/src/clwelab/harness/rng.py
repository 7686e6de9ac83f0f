"""Seeded, splittable randomness.

Every stream is a counter-based Philox generator keyed by a master seed and a
tuple of integer labels, so trial ``k`` of an experiment sees the same stream
no matter how trials are scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream labels must be nonnegative")
        return int(key)
    return zlib.crc32(str(key).encode())


def make_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_label(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def trial_rngs(seed: int, experiment: str, trials: int) -> list[np.random.Generator]:
    return [make_rng(seed, experiment, k) for k in range(trials)]
