"""Deterministic RNG substreams.

Every random draw in the pipeline comes from a generator keyed by the master
seed plus a tuple of integers naming the consumer, so results do not depend
on evaluation order or on how work is scheduled across threads.
"""

from __future__ import annotations

import numpy as np

# Stream purposes; the first element of every spawn key.
SPLIT = 0
NOISE = 1
SAMPLE = 2
SHUFFLE = 3
REPETITION = 4
MONTE_CARLO = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Return a 63-bit child seed for ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def check_random_state(random_state) -> np.random.Generator:
    """Coerce ``None``/int/Generator into a numpy Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return np.random.default_rng(random_state)
    raise TypeError(f"cannot build a Generator from {random_state!r}")
