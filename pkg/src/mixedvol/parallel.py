"""Order-preserving parallel map and reproducible seed streams."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "MIXEDVOL_THREADS"


def max_workers() -> int:
    """Worker cap: MIXEDVOL_THREADS if set, else the CPU count (at most 8)."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    return max(1, min(os.cpu_count() or 1, 8))


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """map() over threads; results come back in input order so reductions are deterministic."""
    workers = max_workers()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child streams of a single 64-bit seed, stable under reordering of work."""
    return np.random.SeedSequence(seed).spawn(count)


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """Generator for task ``index``; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
