"""Deterministic RNG stream derivation shared across the package.

Every source of randomness (data generation, reshuffling, with-replacement
sampling) draws from its own child stream of a single master seed.  Streams
are keyed by a small integer namespace plus context integers (worker id,
epoch), so the same master seed always reproduces the same run while the
individual streams stay statistically independent.
"""

from __future__ import annotations

import numpy as np

PROBLEM = 0
SHUFFLE = 1
SAMPLE = 2

_MAX_KEY = 2**32


def derive(master_seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (master_seed, *key)."""
    for part in key:
        if not 0 <= int(part) < _MAX_KEY:
            raise ValueError(f"stream key component out of range: {part}")
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))


def child_seed(master_seed: int, *key: int) -> int:
    """Fold a stream key into a plain integer seed for APIs that want one."""
    state = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)).generate_state(2)
    return (int(state[0]) << 32) | int(state[1])
