"""Chunked evaluation over sample points.

Results are concatenated in point order, so every reduction downstream sees
the same arrays whatever the thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

_threads = 1


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("thread count must be positive")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def map_points(fn: Callable[[np.ndarray], dict], points: np.ndarray, threads: int | None = None) -> dict:
    """Apply ``fn`` to contiguous chunks of ``points`` (N, n) and join the per-point arrays."""
    threads = _threads if threads is None else threads
    points = np.atleast_2d(points)
    if threads <= 1 or points.shape[0] < 2 * threads:
        return fn(points)
    chunks = np.array_split(points, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(fn, chunks))
    return {k: np.concatenate([np.atleast_1d(p[k]) for p in parts]) for k in parts[0]}
