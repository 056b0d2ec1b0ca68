"""Monte Carlo estimate record and helpers."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

DEFAULT_CAP = 1e300


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int
    seed: int
    clipped: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def scaled(self, c: float) -> "MCEstimate":
        return MCEstimate(self.value * c, self.stderr * abs(c), self.n, self.seed,
                          self.clipped, self.workers)


def clip_values(x, cap: float = DEFAULT_CAP):
    """Clip extended-real samples into ``[-cap, cap]``; returns (values, count)."""
    x = np.asarray(x, dtype=float)
    bad = ~(np.abs(x) <= cap)
    if not bad.any():
        return x, 0
    x = np.where(np.isnan(x), 0.0, np.clip(x, -cap, cap))
    return x, int(bad.sum())


def sample_mean(x, seed: int = 0, workers: int = 1, scale: float = 1.0,
                clipped: int = 0) -> MCEstimate:
    """``scale * mean(x)`` with ``stderr = scale * sd / sqrt(n)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n and np.all(x == x.flat[0]):
        # exact for constant samples; a pairwise sum can drift by an ulp
        m, sd = float(x.flat[0]), 0.0
    else:
        m = float(np.mean(x)) if n else 0.0
        sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return MCEstimate(scale * m, abs(scale) * sd / math.sqrt(max(n, 1)), n, seed, clipped, workers)


def combined_stderr(*ests) -> float:
    return math.sqrt(sum(e.stderr ** 2 for e in ests))
