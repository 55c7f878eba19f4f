"""Ordered parallel map capped by the ``REGRET_THREADS`` environment variable."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("REGRET_THREADS")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"REGRET_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally threaded; output order never depends on scheduling."""
    workers = worker_count() if workers is None else workers
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
