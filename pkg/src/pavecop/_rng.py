import numpy as np


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *keys)``.

    Streams depend only on the key tuple, never on scheduling, so
    replication ``r`` gets the same numbers whatever the worker count.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
