"""Counter-based random streams.

Every stochastic quantity is drawn from a Philox generator keyed by a seed
derived from ``(master_seed, *keys)`` through :class:`numpy.random.SeedSequence`.
A trial's draws therefore depend only on its coordinates, never on which
worker ran it or in what order.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags; values are part of the reproducibility contract
STREAMS = {
    "signal": 1,
    "design": 2,
    "noise": 3,
    "mask": 4,
    "local_search": 5,
    "mc_block": 6,
}


def derive_seed(master_seed, *keys):
    """Hash a master seed and integer keys into a 64-bit seed."""
    master_seed = int(master_seed) & MASK64
    keys = tuple(STREAMS[k] if isinstance(k, str) else int(k) for k in keys)
    for k in keys:
        if k < 0:
            raise ValueError("stream keys must be non-negative, got %d" % k)
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=keys)
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def generator(seed):
    """Philox-backed generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))
