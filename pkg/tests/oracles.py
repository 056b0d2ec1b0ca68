"""Brute-force reference implementations, written independently of the library.

They enumerate every candidate (partition, triple, knot sequence) and use
exact rational arithmetic for time-change geometry.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def vec_norm(x, kind="sup"):
    x = np.asarray(x, dtype=float)
    if kind == "sup":
        return float(np.max(np.abs(x)))
    if kind == "euclidean":
        return float(math.sqrt(float(np.sum(x * x))))
    return float(np.sum(np.abs(x)))


def w_brute(vals, kind="sup"):
    m = len(vals)
    return max((vec_norm(vals[i] - vals[j], kind) for i in range(m) for j in range(m)), default=0.0)


def w_prime_brute(vals, times, lo, hi, eta, kind="sup"):
    """Min over grid-aligned partitions of [lo, hi] (cells ≥ eta) of the max cell oscillation."""
    m = len(vals)
    best = math.inf
    interior = list(range(1, m))
    for r in range(len(interior) + 1):
        for cuts in itertools.combinations(interior, r):
            idx = [0, *cuts, m]
            pos = [lo, *[times[c] for c in cuts], hi]
            if any(pos[k + 1] - pos[k] < eta - 1e-12 * (hi - lo) for k in range(len(pos) - 1)):
                continue
            osc = max(w_brute(vals[idx[k]:idx[k + 1]], kind) for k in range(len(idx) - 1))
            best = min(best, osc)
    return best


def w_doubleprime_brute(vals, times, delta, kind="sup"):
    m = len(vals)
    best = 0.0
    for s in range(m):
        for t in range(s, m):
            for u in range(t, m):
                if times[u] - times[s] <= delta + 1e-12:
                    best = max(best, min(vec_norm(vals[t] - vals[s], kind),
                                         vec_norm(vals[u] - vals[t], kind)))
    return best


def _segment_disc(fv, gv, p, q, p2, q2, kind):
    """Sup of ‖f(λ(t)) - g(t)‖ for t in [p, p2) with λ linear onto [q, q2) (cell units)."""
    slope = Fraction(q2 - q, p2 - p)
    # breakpoints where either t or λ(t) crosses an integer
    pts = {Fraction(p), Fraction(p2)}
    pts.update(Fraction(i) for i in range(p + 1, p2))
    pts.update(p + (Fraction(j) - q) / slope for j in range(q + 1, q2))
    pts = sorted(pts)
    worst = 0.0
    for a, b in zip(pts, pts[1:]):
        mid = (a + b) / 2
        i = math.floor(mid)
        j = math.floor(q + (mid - p) * slope)
        worst = max(worst, vec_norm(fv[j] - gv[i], kind))
    return worst


def window_distance_brute(fv, gv, kind="sup"):
    """Exhaustive min over grid-knot time changes of slope norm + discrepancy."""
    n = len(fv)
    best = math.inf
    inner = range(1, n)
    for r in range(n):
        for ps in itertools.combinations(inner, r):
            for qs in itertools.combinations(inner, r):
                knots = [(0, 0), *zip(ps, qs), (n, n)]
                slope = max(abs(math.log((q2 - q) / (p2 - p)))
                            for (p, q), (p2, q2) in zip(knots, knots[1:]))
                disc = max(_segment_disc(fv, gv, p, q, p2, q2, kind)
                           for (p, q), (p2, q2) in zip(knots, knots[1:]))
                best = min(best, slope + disc)
    return best


def skorohod_brute(points, fv, gv, n_windows=8, kind="sup"):
    """Windowed sum with tapers that zero grid points outside [-j, j]."""
    total = 0.0
    for j in range(1, n_windows + 1):
        keep = (np.abs(points) <= j + 1e-12).astype(float)[:, None]
        total += 2.0 ** -j * min(1.0, window_distance_brute(fv * keep, gv * keep, kind))
    return total + 2.0 ** -n_windows * min(1.0, window_distance_brute(fv, gv, kind))
