"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_map"]


def thread_map(fn, items):
    """Map ``fn`` over ``items``, threading up to $TRICHOTOMY_THREADS workers.

    Defaults to a plain sequential map when the variable is unset, not a
    positive integer, or there is nothing to parallelize.  Used for
    independent runs (per-epsilon continuations, per-shift scans) whose
    state is confined, so plain threads are safe.
    """
    items = list(items)
    try:
        workers = int(os.environ.get("TRICHOTOMY_THREADS", "1"))
    except ValueError:
        workers = 1
    workers = min(workers, len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
