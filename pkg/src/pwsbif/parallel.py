"""Order-preserving map over independent grid points."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "PWSBIF_THREADS"


def worker_count(requested=None):
    """Number of workers: ``requested`` capped by ``$PWSBIF_THREADS`` (default 1)."""
    cap = os.environ.get(ENV_THREADS)
    try:
        cap = max(1, int(cap)) if cap else None
    except ValueError:
        cap = None
    n = requested if requested is not None else (cap or 1)
    return max(1, min(n, cap) if cap else n)


def grid_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, possibly on a thread pool; order is kept."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
