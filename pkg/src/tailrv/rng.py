"""Seeded stream derivation and deterministic worker splitting.

Worker ``w`` of ``W`` draws from the stream keyed by ``(seed, tag, w, role)``;
results are concatenated in worker order, so outputs depend on
``(seed, n, W)`` only, never on how many threads execute the workers.
"""
from __future__ import annotations

import contextlib
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_THREADS = 1


def _key(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Independent generator for ``(seed, *tags)``; disjoint across distinct tags."""
    if int(seed) < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(t) for t in tags))
    return np.random.Generator(np.random.PCG64(ss))


def split_counts(n: int, workers: int) -> list:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    base, extra = divmod(int(n), workers)
    return [base + (w < extra) for w in range(workers)]


class Streams:
    """Role-tagged generators for one worker."""

    def __init__(self, seed: int, tag, worker: int):
        self.seed, self.tag, self.worker = seed, tag, worker
        self._cache = {}

    def __call__(self, role) -> np.random.Generator:
        if role not in self._cache:
            self._cache[role] = derive_rng(self.seed, self.tag, self.worker, role)
        return self._cache[role]


@contextlib.contextmanager
def threads(k: int):
    """Execute worker jobs on ``k`` threads inside the block (results unchanged)."""
    global _THREADS
    old, _THREADS = _THREADS, max(1, int(k))
    try:
        yield
    finally:
        _THREADS = old


def map_workers(fn, n: int, seed: int, workers: int = 1, tag="") -> list:
    """Run ``fn(count, streams)`` for every worker; results in worker order."""
    counts = split_counts(n, workers)
    jobs = [(c, Streams(seed, tag, w)) for w, c in enumerate(counts)]
    if _THREADS > 1 and workers > 1:
        with ThreadPoolExecutor(max_workers=_THREADS) as ex:
            return list(ex.map(lambda job: fn(*job), jobs))
    return [fn(c, s) for c, s in jobs]


def concat(parts) -> np.ndarray:
    parts = [np.asarray(p) for p in parts]
    return np.concatenate(parts, axis=0)
