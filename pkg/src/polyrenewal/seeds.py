"""Deterministic seed derivation and an order-preserving worker pool."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

_MASK = (1 << 64) - 1


def _mix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(*keys: int) -> int:
    """Hash a tuple of integers into a 63-bit seed; stable across processes."""
    h = 0x243F6A8885A308D3
    for k in keys:
        h = _mix(h ^ (int(k) & _MASK))
    return h >> 1


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))


def pmap(func: Callable, items: Sequence, workers: int = 1) -> list:
    """Map preserving input order; results do not depend on ``workers``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


def chunked(seq: Iterable, size: int) -> list[list]:
    seq = list(seq)
    return [seq[i:i + size] for i in range(0, len(seq), size)]
