"""Sup-functionals and oscillation moduli of grid paths.

Every public operation has a batch twin (suffix ``_batch``) working on
value arrays of shape ``(n, n_points, dim_x)``; the diagnostics in
:mod:`tailrv.empirics` use those directly.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidEtaError, UnsupportedDimensionError
from .grid import CadlagPath, GridSpec, apply_norm, check_window, resolve_mask

_CHUNK = 512


def sup_norm(f: CadlagPath, K=None, norm: str = "sup") -> float:
    """max of ``‖f(t)‖`` over grid points in ``K``; 0 when ``K`` holds none."""
    return float(sup_norm_batch(f.grid, f.values[None], K, norm)[0])


def sup_norm_batch(grid: GridSpec, values, K=None, norm: str = "sup") -> np.ndarray:
    mask = resolve_mask(grid, K)
    values = np.asarray(values, dtype=float)
    if not mask.any():
        return np.zeros(values.shape[0])
    return apply_norm(values[:, mask], norm).max(axis=1)


def b0_separated(f: CadlagPath, K=None, eps: float = 1.0, norm: str = "sup") -> bool:
    """Membership test ``f*_K > eps`` (strict)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return sup_norm(f, K, norm) > eps


def modulus_w(f: CadlagPath, K=None, norm: str = "sup") -> float:
    """Oscillation ``max ‖f(t) - f(s)‖`` over grid points of ``K``."""
    return float(modulus_w_batch(f.grid, f.values[None], K, norm)[0])


def modulus_w_batch(grid: GridSpec, values, K=None, norm: str = "sup") -> np.ndarray:
    mask = resolve_mask(grid, K)
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape[0])
    if mask.sum() < 2:
        return out
    sub = values[:, mask]
    if norm == "sup":
        return np.max(sub.max(axis=1) - sub.min(axis=1), axis=-1)
    for lo in range(0, len(sub), _CHUNK):
        blk = sub[lo:lo + _CHUNK]
        out[lo:lo + _CHUNK] = _pairwise(blk, norm).max(axis=(1, 2))
    return out


def _pairwise(vals: np.ndarray, norm: str) -> np.ndarray:
    return apply_norm(vals[:, :, None, :] - vals[:, None, :, :], norm)


def _interval(grid: GridSpec, K):
    if grid.dim_t != 1:
        raise UnsupportedDimensionError("this modulus is implemented for one time axis only")
    if K is None:
        lo, hi = grid.lower[0], grid.upper[0]
    else:
        lo, hi = (float(x[0]) for x in check_window(K, 1))
    mask = grid.window_mask((lo, hi))
    return lo, hi, mask, grid.points[mask, 0]


def modulus_w_prime(f: CadlagPath, K=None, eta: float = 0.1, norm: str = "sup") -> float:
    """Infimum over grid-aligned partitions of ``K`` into cells of length ≥ ``eta``
    of the largest within-cell oscillation (exact, dynamic programming)."""
    return float(modulus_w_prime_batch(f.grid, f.values[None], K, eta, norm)[0])


def modulus_w_prime_batch(grid: GridSpec, values, K=None, eta: float = 0.1,
                          norm: str = "sup") -> np.ndarray:
    lo, hi, mask, times = _interval(grid, K)
    if not eta > 0:
        raise InvalidEtaError("eta must be positive")
    if eta >= hi - lo:
        raise InvalidEtaError(f"eta={eta} must be below the interval length {hi - lo}")
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    m = times.size
    if m == 0:
        return np.zeros(n)
    # cut positions: cell boundaries at lo, interior grid points, hi
    pos = np.concatenate([[lo], times[1:], [hi]])
    tol = 1e-12 * (hi - lo)
    out = np.empty(n)
    sub_all = values[:, mask]
    for c0 in range(0, n, _CHUNK):
        sub = sub_all[c0:c0 + _CHUNK]
        D = _pairwise(sub, norm) * np.tri(m, k=-1)  # keep k < j
        # rowmax[:, j, i] = max_{i <= k < j} D[j, k]
        rev = np.maximum.accumulate(D[:, :, ::-1], axis=2)[:, :, ::-1]
        b = sub.shape[0]
        dp = np.full((b, m + 1), np.inf)
        dp[:, 0] = 0.0
        for i in range(m):
            # osc of points i..j-1 for j = i+1..m
            if i + 1 < m:
                contrib = np.concatenate(
                    [np.zeros((b, 1)), rev[:, np.arange(i + 1, m), i]], axis=1)
            else:
                contrib = np.zeros((b, 1))
            osc = np.maximum.accumulate(contrib, axis=1)  # index j-i-1
            for j in range(i + 1, m + 1):
                if pos[j] - pos[i] < eta - tol:
                    continue
                cand = np.maximum(dp[:, i], osc[:, j - i - 1])
                np.minimum(dp[:, j], cand, out=dp[:, j])
        out[c0:c0 + _CHUNK] = dp[:, m]
    return out


def modulus_w_doubleprime(f: CadlagPath, K=None, delta: float = 0.1, norm: str = "sup") -> float:
    """``sup min(‖f(t)-f(s)‖, ‖f(u)-f(t)‖)`` over grid triples ``s ≤ t ≤ u ≤ s+delta`` in ``K``."""
    if f.grid.dim_t != 1:
        raise UnsupportedDimensionError("modulus_w_doubleprime needs one time axis")
    return float(modulus_w_doubleprime_batch(f.grid, f.values[None], K, delta, norm)[0])


def _w2_line(sub: np.ndarray, times: np.ndarray, delta: float, norm: str) -> np.ndarray:
    b, m = sub.shape[:2]
    out = np.zeros(b)
    if m < 3:
        return out
    tol = 1e-12 * max(1.0, abs(delta))
    umax = np.searchsorted(times, times + delta + tol, side="right") - 1
    for t in range(1, m - 1):
        s_idx = np.arange(t)  # s == t or u == t gives a zero increment
        s_idx = s_idx[umax[s_idx] > t]
        if s_idx.size == 0:
            continue
        A = apply_norm(sub[:, s_idx] - sub[:, t:t + 1], norm)  # (b, |s|)
        B = apply_norm(sub[:, t + 1:] - sub[:, t:t + 1], norm)  # u = t+1..m-1
        prefB = np.maximum.accumulate(B, axis=1)
        best = prefB[:, umax[s_idx] - t - 1]
        out = np.maximum(out, np.max(np.minimum(A, best), axis=1))
    return out


def modulus_w_doubleprime_batch(grid: GridSpec, values, K=None, delta: float = 0.1,
                                norm: str = "sup") -> np.ndarray:
    """Batch w''.  For several time axes the scan runs along each axis line
    separately and the maximum is returned."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    values = np.asarray(values, dtype=float)
    if grid.dim_t == 1:
        _, _, mask, times = _interval(grid, K)
        return _w2_line(values[:, mask], times, delta, norm)
    mask = resolve_mask(grid, K).reshape(grid.resolution)
    vals = values.reshape((values.shape[0],) + grid.resolution + (values.shape[-1],))
    out = np.zeros(values.shape[0])
    for ax in range(grid.dim_t):
        axis_t = grid.axis(ax)
        moved = np.moveaxis(vals, ax + 1, -2)
        mmask = np.moveaxis(mask, ax, -1)
        for idx in np.ndindex(*mmask.shape[:-1]):
            line_mask = mmask[idx]
            if line_mask.sum() < 3:
                continue
            line = moved[(slice(None),) + idx][:, line_mask]
            out = np.maximum(out, _w2_line(line, axis_t[line_mask], delta, norm))
    return out
