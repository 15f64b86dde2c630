"""Seed derivation and ordered parallel map.

Every random stream is derived from a master seed plus integer keys, so
results never depend on how work is scheduled across threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_seed(seed, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *(int(k) for k in keys)])


def instance_seed(seed, *keys) -> int:
    """A 32-bit integer seed for sub-task ``keys`` of a run."""
    return int(derive_seed(seed, *keys).generate_state(1)[0])


def worker_count() -> int:
    raw = os.environ.get("GMAP_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, cap)


def ordered_map(fn, items):
    """``list(map(fn, items))``, possibly on threads; output order is input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
