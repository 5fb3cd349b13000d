"""Deterministic seed splitting.

Every random stream in the package is derived from a master seed and a tuple
of integer keys, ``SeedSequence(master, spawn_key=keys)``.  Point ``i`` of an
experiment uses keys ``(i,)``; replication ``j`` inside it uses ``(i, j)``.
Results therefore never depend on scheduling or completion order.
"""

from __future__ import annotations

import numpy as np


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
