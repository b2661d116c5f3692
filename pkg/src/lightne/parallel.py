"""Thread-count resolution and work chunking.

All parallel operations are written so the result is identical for any
thread count; threads only change how work is scheduled.
"""

from __future__ import annotations

import os

THREADS_ENV_VAR = "LIGHTNE_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument wins, then LIGHTNE_THREADS, then CPU count."""
    if threads is not None:
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        return threads
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
        if value < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def chunk_ranges(n_items: int, n_chunks: int) -> list[tuple[int, int]]:
    """Split [0, n_items) into at most n_chunks contiguous ranges."""
    n_chunks = max(1, min(n_chunks, n_items)) if n_items else 1
    step = (n_items + n_chunks - 1) // n_chunks
    return [(lo, min(lo + step, n_items)) for lo in range(0, n_items, step)] or [(0, 0)]
