"""Test functionals H: D -> [0, ∞] evaluated on batches of grid paths.

A functional maps values of shape ``(..., n_points, dim_x)`` to ``(...)``.
It carries its homogeneity degree and, when it has one, the support data
``(K_H, eps_H)``: ``H(f) = 0`` whenever ``f*_{K_H} <= eps_H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import CadlagPath, GridSpec, apply_norm, resolve_mask


@dataclass(frozen=True)
class Functional:
    fn: Callable[[np.ndarray], np.ndarray]
    degree: Optional[float] = None
    bounded: bool = False
    support: Optional[tuple] = None  # (mask over grid points, eps_H)
    name: str = "H"

    def __call__(self, f):
        if isinstance(f, CadlagPath):
            return float(self.fn(f.values[None])[0])
        v = np.asarray(f, dtype=float)
        if v.ndim == 2:
            return float(self.fn(v[None])[0])
        return np.asarray(self.fn(v), dtype=float)

    def check_homogeneity(self, values, rng, n_scales: int = 5, rtol: float = 1e-9) -> bool:
        """Spot-check ``H(c f) = c^λ H(f)`` on random scales."""
        if self.degree is None:
            return True
        values = np.asarray(values, dtype=float)
        base = self.fn(values)
        for c in rng.uniform(0.1, 10.0, n_scales):
            if not np.allclose(self.fn(c * values), c ** self.degree * base, rtol=rtol, atol=0):
                return False
        return True

    def check_support(self, values, norm: str = "sup") -> bool:
        """Spot-check that H vanishes on paths with ``f*_{K_H} <= eps_H``."""
        if self.support is None:
            return True
        mask, eps = self.support
        values = np.asarray(values, dtype=float)
        sup = apply_norm(values[:, mask], norm).max(axis=1) if mask.any() else np.zeros(len(values))
        low = sup <= eps
        return bool(np.all(self.fn(values[low]) == 0)) if low.any() else True


def _site_norm(values, site: int, norm: str):
    return apply_norm(values[..., site, :], norm)


def constant(c: float = 1.0) -> Functional:
    return Functional(lambda v: np.full(v.shape[:-2], float(c)), degree=0.0, bounded=True,
                      name=f"const({c})")


def zero(grid: GridSpec) -> Functional:
    return Functional(lambda v: np.zeros(v.shape[:-2]), degree=0.0, bounded=True,
                      support=(np.zeros(grid.n_points, dtype=bool), np.inf), name="zero")


def sup_exceedance(grid: GridSpec, K=None, level: float = 1.0, norm: str = "sup") -> Functional:
    """``1{f*_K > level}``."""
    mask = resolve_mask(grid, K)

    def fn(v):
        return (apply_norm(v[..., mask, :], norm).max(axis=-1) > level).astype(float)

    return Functional(fn, bounded=True, support=(mask, float(level)), name=f"1{{f*_K>{level}}}")


def coordinate_indicator(grid: GridSpec, t, a: float = 1.0, norm: str = "sup") -> Functional:
    """``1{‖f(t)‖ > a}``."""
    s = grid.site(t)
    mask = resolve_mask(grid, s)
    return Functional(lambda v: (_site_norm(v, s, norm) > a).astype(float), bounded=True,
                      support=(mask, float(a)), name=f"ind[{s}>{a}]")


def clipped_lipschitz(grid: GridSpec, t, s, a: float = 1.0, norm: str = "sup") -> Functional:
    """``min(1, max(0, max(‖f(t)‖, ‖f(s)‖) - a))``: distance past a threshold, capped."""
    i, j = grid.site(t), grid.site(s)
    mask = resolve_mask(grid, i) | resolve_mask(grid, j)

    def fn(v):
        m = np.maximum(_site_norm(v, i, norm), _site_norm(v, j, norm))
        return np.minimum(1.0, np.maximum(0.0, m - a))

    return Functional(fn, bounded=True, support=(mask, float(a)), name=f"lip[{i},{j};{a}]")


def ratio(grid: GridSpec, t, h, cap: float = 5.0, norm: str = "sup") -> Functional:
    """``min(cap, ‖f(t)‖ / ‖f(h)‖)``, set to 0 where ``f(h) = 0``; 0-homogeneous."""
    i, j = grid.site(t), grid.site(h)

    def fn(v):
        num, den = _site_norm(v, i, norm), _site_norm(v, j, norm)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        return np.minimum(cap, r)

    return Functional(fn, degree=0.0, bounded=True, name=f"ratio[{i}/{j};{cap}]")


def zero_homogenize(G: Functional, grid: GridSpec, sites, norm: str = "sup") -> Functional:
    """``f -> G(f / m(f))`` with ``m(f) = max over sites of ‖f‖``; 0 where ``m = 0``."""
    idx = [grid.site(s) for s in sites]

    def fn(v):
        m = np.max(np.stack([_site_norm(v, i, norm) for i in idx]), axis=0)
        safe = np.where(m > 0, m, 1.0)
        out = G.fn(v / safe[..., None, None])
        return np.where(m > 0, out, 0.0)

    return Functional(fn, degree=0.0, bounded=G.bounded, name=f"{G.name}/max")


def min_power(G0: Functional, grid: GridSpec, h, t, alpha: float, norm: str = "sup") -> Functional:
    """``min(‖f‖_h, ‖f‖_t)^α G0(f)``; α-homogeneous when G0 is 0-homogeneous."""
    i, j = grid.site(h), grid.site(t)

    def fn(v):
        m = np.minimum(_site_norm(v, i, norm), _site_norm(v, j, norm))
        return m ** alpha * G0.fn(v)

    return Functional(fn, degree=alpha, bounded=False, name=f"min^a*{G0.name}")


def builtin_panel(grid: GridSpec, h, t, norm: str = "sup") -> list:
    """Fixed panel used by the identity suite for bounded functionals (version 1)."""
    return [
        coordinate_indicator(grid, h, 1.5, norm),
        clipped_lipschitz(grid, h, t, 1.0, norm),
        ratio(grid, t, h, 5.0, norm),
    ]


def builtin_panel_0hom(grid: GridSpec, h, t, norm: str = "sup") -> list:
    """0-homogeneous panel: the bounded panel evaluated on ``f / max(‖f‖_h, ‖f‖_t)``."""
    return [
        zero_homogenize(coordinate_indicator(grid, t, 0.5, norm), grid, (h, t), norm),
        zero_homogenize(clipped_lipschitz(grid, h, t, 0.25, norm), grid, (h, t), norm),
        ratio(grid, t, h, 5.0, norm),
    ]
