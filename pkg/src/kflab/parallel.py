"""Deterministic fan-out over worker threads."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "KFLAB_THREADS"


def thread_cap(requested=None):
    """Worker count: ``requested`` if given, else ``$KFLAB_THREADS``, else the CPU count."""
    if requested is None:
        env = os.environ.get(ENV_THREADS)
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def ordered_map(fn, items, max_workers=None):
    """``[fn(x) for x in items]``, possibly on threads; result order follows ``items``."""
    items = list(items)
    workers = min(thread_cap(max_workers), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
