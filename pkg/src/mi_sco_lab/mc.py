"""Seeding discipline and chunked Monte Carlo loops.

Every stochastic routine derives its generator from a master seed plus an
integer path, so results are reproducible bit-for-bit. Long trial loops are
split into fixed-size chunks whose streams depend only on (seed, chunk index);
worker count changes scheduling but never the reduction order, so parallel
and serial runs agree byte-for-byte.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 14

THREADS_ENV = "MI_SCO_THREADS"


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *path)."""
    return np.random.default_rng([int(master_seed), *[int(p) for p in path]])


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def chunked_trials(fn, n_trials: int, master_seed: int, *path: int,
                   chunk: int = CHUNK) -> np.ndarray:
    """Run ``fn(rng, size) -> 1-D array`` over n_trials in deterministic chunks.

    Chunk c uses the stream (master_seed, *path, c). Results are concatenated
    in chunk order regardless of how many workers executed them.
    """
    n_trials = int(n_trials)
    bounds = [(c, min(chunk, n_trials - c * chunk))
              for c in range((n_trials + chunk - 1) // chunk)]

    def run(cb):
        c, size = cb
        return fn(substream(master_seed, *path, c), size)

    workers = worker_count()
    if workers == 1 or len(bounds) <= 1:
        parts = [run(cb) for cb in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (ddof=1; SE=0 for a single value)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(n))
