"""Deterministic ordered map over independent work items.

Work is always split into the same chunks whatever the worker count, and
results come back in index order, so reductions are bit-reproducible.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "HOFERLAB_THREADS"


def worker_count(default=1):
    raw = os.environ.get(ENV_THREADS)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


def ordered_map(func, items, workers=None):
    """Apply ``func`` to every item and return the results in input order."""
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def chunk_slices(total, chunk):
    """Fixed-size slices covering ``range(total)``; independent of worker count."""
    return [slice(i, min(i + chunk, total)) for i in range(0, total, chunk)]
