"""Counter-based seed derivation.

Every random stream in a run is derived from ``(master_seed, replication,
module tag)`` through :class:`numpy.random.SeedSequence`, so streams are
independent, order-free, and reproducible across worker counts.
"""

import numpy as np

PREFERENCE = 0
OBSERVATION = 1
SPLIT = 2
RECOMMEND = 3
STATS = 4
CALIBRATE = 5


def derive_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def make_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *key))


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
