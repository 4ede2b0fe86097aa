"""Worker-count independent Monte Carlo execution.

Work is cut into fixed blocks whose seeds derive from the block index, so
the concatenated output is the same whether one or many workers ran it.
"""

import os

import numpy as np
from joblib import Parallel, delayed

from ._random import derive_seed

BLOCK_SIZE = 1 << 14
ENV_THREADS = "SPARSEREC_THREADS"


def resolve_jobs(n_jobs=None):
    if n_jobs is None:
        n_jobs = int(os.environ.get(ENV_THREADS, "1") or 1)
    return max(1, int(n_jobs))


def run_blocks(func, total, seed, n_jobs=None, block_size=BLOCK_SIZE, args=()):
    """Call ``func(size, block_seed, *args)`` over fixed blocks and concatenate.

    ``func`` must return a 1-d array (or a tuple of them) of length ``size``.
    """
    sizes = [min(block_size, total - lo) for lo in range(0, total, block_size)]
    seeds = [derive_seed(seed, "mc_block", k) for k in range(len(sizes))]
    n_jobs = resolve_jobs(n_jobs)
    if n_jobs == 1 or len(sizes) == 1:
        parts = [func(size, bs, *args) for size, bs in zip(sizes, seeds)]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(func)(size, bs, *args) for size, bs in zip(sizes, seeds))
    if parts and isinstance(parts[0], tuple):
        return tuple(np.concatenate(cols) for cols in zip(*parts))
    return np.concatenate(parts) if parts else np.zeros(0)
