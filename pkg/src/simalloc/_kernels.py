"""Hot per-set cache kernels.

The set probe / LRU-fill loops run once or more per simulated memory access
and dominate simulator runtime. They are compiled with numba when available;
set ``SIMALLOC_NO_NUMBA=1`` to force the pure Python/numpy fallback (same
functions, undecorated). ``benchmarks/bench_cache.py`` compares the two.
"""

import os

import numpy as np


def probe_set(tags_row, tag):
    """Way index holding ``tag`` in this set, or -1."""
    for w in range(tags_row.shape[0]):
        if tags_row[w] == tag:
            return w
    return -1


def fill_set(tags_row, stream_row, lastuse_row, tag, stream, lo, hi, tick):
    """Insert ``tag`` into ways [lo, hi), evicting LRU if needed.

    Returns the evicted tag, or -1 if an invalid way was used.
    """
    victim = -1
    oldest = np.int64(0x7FFFFFFFFFFFFFFF)
    for w in range(lo, hi):
        if tags_row[w] == -1:
            tags_row[w] = tag
            stream_row[w] = stream
            lastuse_row[w] = tick
            return -1
        if lastuse_row[w] < oldest:
            oldest = lastuse_row[w]
            victim = w
    evicted = tags_row[victim]
    tags_row[victim] = tag
    stream_row[victim] = stream
    lastuse_row[victim] = tick
    return evicted


def invalidate_tag(tags_row, tag):
    """Drop ``tag`` from this set if present; returns True if it was."""
    for w in range(tags_row.shape[0]):
        if tags_row[w] == tag:
            tags_row[w] = -1
            return True
    return False


NUMBA_ENABLED = os.environ.get("SIMALLOC_NO_NUMBA", "") not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
    else:
        probe_set = njit(cache=True)(probe_set)
        fill_set = njit(cache=True)(fill_set)
        invalidate_tag = njit(cache=True)(invalidate_tag)
