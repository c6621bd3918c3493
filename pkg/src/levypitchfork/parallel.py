"""Ordered parallel map over path indices.

Every task derives its randomness from its own path index, so results do
not depend on how tasks are scheduled; the pool only changes wall time.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_default_threads = None


def set_default_threads(n):
    global _default_threads
    _default_threads = n


def resolve_threads(threads=None) -> int:
    n = threads if threads is not None else _default_threads
    if n is None:
        n = os.cpu_count() or 1
    if int(n) < 1:
        raise ValueError(f"threads={threads!r} must be >= 1")
    return int(n)


def map_ordered(fn, items, threads=None, chunk=32):
    """[fn(i) for i in items], evaluated on a thread pool, in input order."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) <= chunk:
        return [fn(i) for i in items]
    chunks = [items[s:s + chunk] for s in range(0, len(items), chunk)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        parts = pool.map(lambda c: [fn(i) for i in c], chunks)
        return [r for part in parts for r in part]
