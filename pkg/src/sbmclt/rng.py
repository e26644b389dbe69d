"""Seed derivation: every random stream is a Philox substream keyed by (seed, *key)."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# First element of every substream key, so the streams used by different
# consumers of one seed never coincide.
EDGES = 0
CLOCKS = 1
GRAPH_SIDE = 2
REPLICA = 3


def _seed_sequence(seed: int, key) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) & _MASK64 for k in key))


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed determined by ``(seed, *key)``."""
    return int(_seed_sequence(seed, key).generate_state(1, dtype=np.uint64)[0])
