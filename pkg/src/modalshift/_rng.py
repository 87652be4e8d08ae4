"""Deterministic seed derivation keyed on stable entity identity.

Every random draw in the simulation is keyed on (master seed, stream tag,
entity id, ...) instead of on iteration order, so results are invariant to
agent ordering, worker-pool chunking, and scheduling. Scenario runs reuse the
baseline master seed and therefore replay the exact same draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags; one per consumer so key paths never collide.
TAG_HOUSEHOLD = 11
TAG_PREFS = 12
TAG_WORKER = 13
TAG_WORKPLACE = 14
TAG_GA = 15
TAG_PERIOD = 16
TAG_TIEBREAK = 17
TAG_CITY = 18


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stable_hash(*keys: int) -> int:
    """64-bit hash of an integer key path. Order sensitive, no RNG state."""
    h = 0x8000000000000001
    for k in keys:
        h = _splitmix64((h ^ (int(k) & _MASK64)) & _MASK64)
    return h


def stable_u01(*keys: int) -> float:
    """One uniform [0, 1) draw fully determined by the key path."""
    return (stable_hash(*keys) >> 11) * (1.0 / (1 << 53))


def substream(*keys: int) -> np.random.Generator:
    """Independent PCG64 generator keyed by the integer path."""
    return np.random.default_rng(np.random.SeedSequence(entropy=stable_hash(*keys)))


def minstd_seed(*keys: int) -> int:
    """Nonzero 31-bit seed for the in-kernel multiplicative generator."""
    return (stable_hash(*keys) % 2147483646) + 1
