"""Seeded random streams.

Philox is counter based: the same 64-bit seed always yields the same
sequence, independent of platform and of how many other streams exist.
"""

import os

import numpy as np

SEED_ENV = "ECPSIM_SEED"
DEFAULT_SEED = 0


def stream(seed: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def default_seed() -> int:
    """Seed from ``$ECPSIM_SEED`` if set, else 0."""
    raw = os.environ.get(SEED_ENV)
    return DEFAULT_SEED if raw in (None, "") else int(raw)
