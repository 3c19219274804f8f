"""Counter-based random streams.

A single root seed fans out into independent `numpy.random.Generator`s keyed by
integers (grid index, run index, ...), so parallel work never shares a stream
and every stream can be recreated in isolation.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the Philox stream for `key` under the root `seed`."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))
