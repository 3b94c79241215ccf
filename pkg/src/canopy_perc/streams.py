"""Per-replicate random streams and the worker pool.

Replicate ``i`` of a run with master seed ``s`` uses the 64-bit seed

    SeedSequence(s, spawn_key=(i,)).generate_state(1, uint64)[0]

fed to ``numpy.random.default_rng``.  The seed is written into every record,
so ``default_rng(seed)`` reproduces that replicate on its own.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def replicate_seed(master_seed: int, index) -> int:
    """Seed of replicate ``index``; a tuple index names a nested stream, e.g. (k, i)."""
    key = tuple(int(j) for j in index) if isinstance(index, tuple) else (int(index),)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def replicate_rng(master_seed: int, index) -> np.random.Generator:
    return np.random.default_rng(replicate_seed(master_seed, index))


def _run_chunk(args):
    fn, master_seed, indices = args
    return [(i, fn(i, replicate_seed(master_seed, i))) for i in indices]


def map_replicates(fn: Callable[[int, int], object], master_seed: int, indices: Sequence[int],
                   workers: int = 1) -> list:
    """Evaluate ``fn(index, seed)`` for every replicate; results in index order.

    ``fn`` must be picklable when ``workers > 1``.  Results never depend on the
    worker count because each replicate owns its stream.
    """
    indices = list(indices)
    if workers <= 1 or len(indices) < 2:
        return [fn(i, replicate_seed(master_seed, i)) for i in indices]
    n_chunks = min(len(indices), workers * 4)
    chunks = [indices[j::n_chunks] for j in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(fn, master_seed, c) for c in chunks])
        out = [pair for part in parts for pair in part]
    out.sort(key=lambda pair: pair[0])
    return [r for _, r in out]


def default_workers() -> int:
    env = os.environ.get("CANOPY_WORKERS")
    return int(env) if env else 1
