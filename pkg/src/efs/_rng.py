"""Deterministic stream derivation and the shared worker pool."""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_rng(seed, *keys):
    """Generator for the stream identified by ``(seed, *keys)``.

    Streams with different keys are statistically independent, and the
    mapping never depends on call order, so replicates can run in any order.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def n_threads():
    """Worker count from ``EFS_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("EFS_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("EFS_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def map_ordered(fn, items):
    """``list(map(fn, items))``, spread over the worker pool when it has >1 thread."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
