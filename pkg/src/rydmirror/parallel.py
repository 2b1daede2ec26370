"""Thread-pool map with deterministic result ordering.

Every parallel loop in the package goes through ``pmap`` so that the thread
count never changes what is computed, only how fast.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

_default_threads = 1


def set_default_threads(n: Optional[int]) -> None:
    global _default_threads
    _default_threads = max(1, int(n or 1))


def default_threads() -> int:
    return _default_threads


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def pmap(fn: Callable, items: Iterable, threads: Optional[int] = None) -> List:
    """``[fn(x) for x in items]`` evaluated on up to ``threads`` workers."""
    items = list(items)
    n = default_threads() if threads is None else max(1, int(threads))
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
