"""Deterministic random substreams keyed by (seed, iteration, index, purpose)."""

import numpy as np

DIRECTION = 0
OFFSPRING = 1
TRIAL = 2
INIT = 3
SURROGATE = 4
WARMUP = 5

_MASK = (1 << 64) - 1


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the given key path; any integer seed works."""
    entropy = [int(seed) & _MASK, *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
