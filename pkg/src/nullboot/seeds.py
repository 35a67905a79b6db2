"""
Counter-based seed derivation.

A child seed depends only on the master seed and its key path, so replicate q
gets the same stream no matter how many replicates run or in which order.
"""

import numpy as np


def derive_seed(master: int, *key: int) -> int:
    """Derive a 32-bit seed from a master seed and an integer key path."""
    sequence = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1)[0])


def derive_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key)))
