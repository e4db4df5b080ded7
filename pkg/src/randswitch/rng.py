"""Counter-based random streams keyed by (seed, purpose, chunk).

Paths are processed in fixed-size chunks; each chunk draws from its own
Philox stream, so results do not depend on how chunks are scheduled.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 16
THREADS_ENV = "RANDSWITCH_THREADS"


def purpose_tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, purpose: str, chunk: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), purpose_tag(purpose), int(chunk)])
    return np.random.Generator(np.random.Philox(ss))


def chunks(n: int, size: int = CHUNK):
    """``(chunk_index, start, stop)`` covering ``range(n)``."""
    for i, start in enumerate(range(0, n, size)):
        yield i, start, min(start + size, n)


def threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def map_chunks(fn, n: int, size: int = CHUNK):
    """Apply ``fn(chunk_index, start, stop)`` to every chunk and concatenate
    the results in chunk order."""
    work = list(chunks(n, size))
    nthreads = threads()
    if nthreads == 1 or len(work) == 1:
        parts = [fn(*w) for w in work]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(lambda w: fn(*w), work))
    return np.concatenate(parts, axis=0)
