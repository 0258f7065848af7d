from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SPARSE_QUASI_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``list(map(fn, items))``, optionally on a thread pool; output order is input order."""
    items = list(items)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def ordered_sum(values: Iterable):
    """Left-to-right sum; the fixed order keeps results independent of scheduling."""
    total = None
    for v in values:
        total = v if total is None else total + v
    return 0.0 if total is None else total
