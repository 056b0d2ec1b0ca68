"""Process generators on grids: Gaussian fields, Brown–Resnick spectral
processes, the de Haan max-stable series and Pareto-scaled processes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidSigmaError, NonPSDKernelError
from .grid import CadlagPath, GridSpec, apply_norm
from .tail import (ParetoSampler, RepresenterSampler, SpectralTailFamily, TailProcessFamily,
                   check_alpha, family_from_representer, site_norms)
from .rng import concat, derive_rng, map_workers

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
KERNELS = ("brownian", "fbm", "squared_exponential", "zero")


def _dist(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((s[:, None, :] - t[None, :, :]) ** 2, axis=-1))


def kernel_matrix(points: np.ndarray, kind, **params) -> np.ndarray:
    """Covariance ``c(s, t)`` on grid points.

    ``brownian``/``fbm``: ``½(|s-o|^{2H} + |t-o|^{2H} - |s-t|^{2H})`` pinned at
    ``origin`` (``H = ½`` for brownian, so ``min(s, t)`` for ``s, t ≥ o``);
    ``squared_exponential``: ``σ² exp(-|s-t|² / 2ℓ²)``; a callable gets
    ``(points, points)`` and returns the matrix.
    """
    pts = np.asarray(points, dtype=float)
    if callable(kind):
        return np.asarray(kind(pts, pts), dtype=float)
    if kind in ("brownian", "fbm"):
        hurst = 0.5 if kind == "brownian" else float(params.get("hurst", 0.5))
        if not 0 < hurst <= 1:
            raise ValueError("Hurst exponent must lie in (0, 1]")
        scale = float(params.get("scale", 1.0))
        o = np.broadcast_to(np.asarray(params.get("origin", 0.0), dtype=float), pts.shape[1:])
        r = np.sqrt(np.sum((pts - o) ** 2, axis=-1)) ** (2 * hurst)
        return scale * 0.5 * (r[:, None] + r[None, :] - _dist(pts, pts) ** (2 * hurst))
    if kind == "squared_exponential":
        var = float(params.get("variance", 1.0))
        ell = float(params.get("length_scale", 1.0))
        return var * np.exp(-_dist(pts, pts) ** 2 / (2 * ell * ell))
    if kind == "zero":
        return np.zeros((len(pts), len(pts)))
    raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS} or a callable")


def cholesky_jitter(C: np.ndarray) -> np.ndarray:
    """Lower factor ``L`` with ``L Lᵀ ≈ C``; zero-variance rows stay exactly zero.

    Jitter ``j · max diag`` is tried for ``j`` in :data:`JITTER_LADDER`.
    """
    C = np.asarray(C, dtype=float)
    if C.shape[0] != C.shape[1] or not np.allclose(C, C.T, rtol=1e-10, atol=1e-14):
        raise NonPSDKernelError("covariance matrix is not symmetric")
    diag = np.diag(C)
    if np.any(diag < 0):
        raise NonPSDKernelError("negative variance on the diagonal")
    live = diag > 0
    L = np.zeros_like(C)
    if not live.any():
        return L
    sub = C[np.ix_(live, live)]
    scale = float(diag.max())
    for j in JITTER_LADDER:
        try:
            Ls = np.linalg.cholesky(sub + j * scale * np.eye(len(sub)))
        except np.linalg.LinAlgError:
            continue
        L[np.ix_(live, live)] = Ls
        return L
    raise NonPSDKernelError("covariance not factorizable after the jitter ladder")


@dataclass(frozen=True)
class GaussianSpec:
    """Centered ℝᵈ Gaussian field with separable covariance ``c(s, t) R_ij``."""

    grid: GridSpec
    kernel: Union[str, Callable] = "brownian"
    params: dict = field(default_factory=dict)
    cross: Optional[np.ndarray] = None  # d x d correlation

    @cached_property
    def covariance(self) -> np.ndarray:
        return kernel_matrix(self.grid.points, self.kernel, **self.params)

    @cached_property
    def cross_matrix(self) -> np.ndarray:
        d = self.grid.dim_x
        R = np.eye(d) if self.cross is None else np.asarray(self.cross, dtype=float)
        if R.shape != (d, d) or not np.allclose(np.diag(R), 1.0):
            raise NonPSDKernelError("cross structure must be a d x d correlation matrix")
        return R

    @cached_property
    def factors(self):
        """``(L_C, L_R)``; computed once and shared read-only."""
        return cholesky_jitter(self.covariance), cholesky_jitter(self.cross_matrix)

    @property
    def variance(self) -> np.ndarray:
        """``Var V_i(t)`` from the assembled covariance diagonal, shape ``(P, d)``."""
        return np.outer(np.diag(self.covariance), np.diag(self.cross_matrix))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        Lc, Lr = self.factors
        g = rng.standard_normal((n, self.grid.n_points, self.grid.dim_x))
        return np.matmul(Lc, g) @ Lr.T

    def to_dict(self) -> dict:
        return {"kernel": self.kernel if isinstance(self.kernel, str) else "callable",
                "params": dict(self.params),
                "cross": None if self.cross is None else np.asarray(self.cross).tolist()}


def sample_gaussian(spec: GaussianSpec, n: int, *, seed: int = 0, workers: int = 1,
                    tag="gauss") -> np.ndarray:
    return concat(map_workers(lambda c, s: spec.sample(s("V"), c), n, seed, workers, tag))


@dataclass(frozen=True)
class BrownResnickSpec:
    gaussian: GaussianSpec
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    @property
    def grid(self) -> GridSpec:
        return self.gaussian.grid


def brown_resnick_from_gaussian(V: np.ndarray, variance: np.ndarray, alpha: float) -> np.ndarray:
    """``Z_i(t) = exp(V_i(t) - α Var V_i(t) / 2)`` applied to given Gaussian draws."""
    return np.exp(np.asarray(V) - 0.5 * alpha * np.asarray(variance))


def sample_brown_resnick_spectral(spec: BrownResnickSpec, n: int, *, seed: int = 0,
                                  workers: int = 1, tag="br") -> np.ndarray:
    V = sample_gaussian(spec.gaussian, n, seed=seed, workers=workers, tag=tag)
    return brown_resnick_from_gaussian(V, spec.gaussian.variance, spec.alpha)


def brown_resnick_representer(spec: BrownResnickSpec, norm: str = "sup") -> RepresenterSampler:
    """Representer sampler; ``p_h = 1`` is exact for one component."""
    g, var, alpha = spec.gaussian, spec.gaussian.variance, spec.alpha
    p = np.ones(spec.grid.n_points) if spec.grid.dim_x == 1 else None
    return RepresenterSampler(spec.grid, alpha,
                              lambda rng, n: brown_resnick_from_gaussian(g.sample(rng, n), var, alpha),
                              norm=norm, p_exact=p, name="brown_resnick")


def brown_resnick_tail_family(spec: BrownResnickSpec, q=None, norm: str = "sup",
                              **sir) -> TailProcessFamily:
    """Local tail processes of the Brown–Resnick tail measure.

    For one component the tilt by ``Z(h)^α`` is a Cameron–Martin shift, so
    ``Θ^[h](t) = exp(V(t) - V(h) - α γ(t, h) / 2)`` with the variogram
    ``γ(t, h) = C(t,t) + C(h,h) - 2C(t,h)`` and ``p_h = 1``; this is exact.
    Several components fall back to sampling-importance-resampling.
    """
    grid, alpha = spec.grid, spec.alpha
    q = np.ones(grid.n_points) if q is None else q
    if grid.dim_x > 1:
        return family_from_representer(brown_resnick_representer(spec, norm), q, **sir)
    C = spec.gaussian.covariance
    dC = np.diag(C)
    gamma = dC[:, None] + dC[None, :] - 2 * C  # gamma[t, h]

    def sampler(site, rng, n):
        V = spec.gaussian.sample(rng, n)[..., 0]
        th = np.exp(V - V[:, site:site + 1] - 0.5 * alpha * gamma[:, site][None, :])
        return th[..., None]

    return SpectralTailFamily(grid, alpha, np.ones(grid.n_points), q, sampler, norm,
                              name="brown_resnick")


@dataclass(frozen=True)
class DeHaanConfig:
    spectral: RepresenterSampler
    truncation_tol: float = 1.0
    max_terms: int = 10_000
    cap_quantile: float = 0.999
    cap_pilot: int = 10_000

    def __post_init__(self):
        if not self.truncation_tol > 0:
            raise ValueError("truncation_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


@dataclass(frozen=True)
class DeHaanResult:
    paths: np.ndarray
    terms: np.ndarray
    truncated: np.ndarray  # True where max_terms hit before the tolerance was met
    bound: np.ndarray  # Γ^{-1/α} · cap at the stop, relative to min of X


def _dehaan_one(cfg: DeHaanConfig, rng, cap0: float):
    """One series, drawn in blocks of doubling size from the sample's own stream.

    The draws do not depend on the stopping rule, so lowering the tolerance
    can only add terms to the same realization.
    """
    Z = cfg.spectral
    a = -1.0 / Z.alpha
    X = np.zeros((Z.grid.n_points, Z.grid.dim_x))
    gam, zmax, terms, block = 0.0, 0.0, 0, 8
    while terms < cfg.max_terms:
        b = min(block, cfg.max_terms - terms)
        G = gam + np.cumsum(rng.standard_exponential(b))
        z = Z.sample(rng, b)
        zn = np.maximum.accumulate(np.maximum(zmax, apply_norm(z, Z.norm).max(axis=1)))
        run = np.maximum.accumulate(np.concatenate([X[None], G[:, None, None] ** a * z]), axis=0)
        floor = run.reshape(b + 1, -1).min(axis=1)
        # before adding term k (k >= 1 overall) the series may stop
        cap = np.maximum(cap0, np.concatenate([[zmax], zn[:-1]]))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(floor[:-1] > 0, G ** a * cap / floor[:-1], np.inf)
        if terms == 0:
            rel[0] = np.inf
        stop = np.flatnonzero(rel < cfg.truncation_tol)
        if stop.size:
            k = int(stop[0])
            return run[k], terms + k, False, float(rel[k])
        X, gam, zmax, terms = run[-1], float(G[-1]), float(zn[-1]), terms + b
        block *= 2
    return X, terms, True, np.inf


def _dehaan_block(cfg: DeHaanConfig, seed, tag, worker, n: int, cap0: float):
    out = [_dehaan_one(cfg, derive_rng(seed, tag, worker, "series", i), cap0) for i in range(n)]
    shape = (n, cfg.spectral.grid.n_points, cfg.spectral.grid.dim_x)
    X = np.array([o[0] for o in out]).reshape(shape)
    return (X, np.array([o[1] for o in out], dtype=int), np.array([o[2] for o in out], dtype=bool),
            np.array([o[3] for o in out], dtype=float))


def sample_dehaan_maxstable(cfg: DeHaanConfig, n: int, *, seed: int = 0, workers: int = 1,
                            tag="dehaan") -> DeHaanResult:
    """Max-stable paths ``X = max_i Γ_i^{-1/α} Z^(i)`` by truncating the series.

    Summation stops once ``Γ_i^{-1/α} · cap < tol · min_t X(t)``, where ``cap``
    is the larger of the sample's running max of ``Z*`` and a pooled
    high quantile of ``Z*``; ``max_terms`` is a backstop that sets the
    ``truncated`` flag.
    """
    Z = cfg.spectral
    pilot = Z.draw(cfg.cap_pilot, seed, 1, tag=(tag, "cap"))
    cap0 = float(np.quantile(apply_norm(pilot, Z.norm).max(axis=1), cfg.cap_quantile))
    parts = map_workers(lambda c, s: _dehaan_block(cfg, seed, tag, s.worker, c, cap0), n, seed,
                        workers, tag)
    return DeHaanResult(*(concat([p[k] for p in parts]) for k in range(4)))


def sample_scaled_pareto(Z: RepresenterSampler, n: int, R: ParetoSampler | None = None, *,
                         seed: int = 0, workers: int = 1, tag="rz", return_radius: bool = False):
    """Paths ``R_i Z_i`` with independent α-Pareto ``R_i``."""
    R = R or ParetoSampler(Z.alpha)

    def job(c, s):
        z = Z.sample(s("Z"), c)
        r = R.sample(s("R"), c)
        return r[:, None, None] * z, r

    parts = map_workers(job, n, seed, workers, tag)
    X = concat([p[0] for p in parts])
    if return_radius:
        return X, concat([p[1] for p in parts])
    return X


def _grid_values(x, grid: GridSpec | None):
    if isinstance(x, CadlagPath):
        return x.values
    return np.asarray(x, dtype=float)


def transform_scale_shift(X, sigma, f=0.0):
    """Pointwise ``σ(t) X(t) + f(t)``; ``X`` a path or a batch, ``σ`` scalar-valued."""
    xv = _grid_values(X, None)
    sv = _grid_values(sigma, None)
    if sv.ndim == 2:
        sv = sv[:, 0]
    if np.any(sv == 0):
        raise InvalidSigmaError("sigma vanishes at a grid point")
    fv = _grid_values(f, None)
    out = sv[:, None] * xv + fv
    if isinstance(X, CadlagPath):
        return CadlagPath(X.grid, out)
    return out


@dataclass(frozen=True)
class RandomScaleResult:
    paths: np.ndarray
    moment: float  # estimate of E[(σ*)^{α+ε}]
    warnings: tuple


def random_scale(X, sigma, n: int, alpha: float, *, eps: float = 0.5, seed: int = 0,
                 workers: int = 1, tag="sigma") -> RandomScaleResult:
    """Products ``σ_i X_i`` with independent ``σ`` and ``X``.

    ``X`` and ``sigma`` are samplers (objects with ``sample(rng, n)`` or
    callables ``(rng, n) -> values``).  The moment check on ``(σ*)^{α+ε}``
    and the nonvanishing check only raise warning flags.
    """
    def draw(src, rng, c):
        fn = src.sample if hasattr(src, "sample") else src
        return np.asarray(fn(rng, c), dtype=float)

    def job(c, s):
        x = draw(X, s("X"), c)
        sg = draw(sigma, s("sigma"), c)
        if sg.ndim == x.ndim - 1:
            sg = sg[..., None]
        return sg * x, sg

    parts = map_workers(job, n, seed, workers, tag)
    paths = concat([p[0] for p in parts])
    sg = concat([p[1] for p in parts])
    sup = np.abs(sg).reshape(n, -1).max(axis=1)
    m = sup ** (alpha + eps)
    warnings = []
    moment = float(m.mean())
    quarter = float(m[: max(1, n // 4)].mean())
    if not math.isfinite(moment) or (quarter > 0 and moment >= 2 * quarter):
        warnings.append("moment_divergence")
    if not np.any(sg != 0):
        warnings.append("sigma_vanishes")
    return RandomScaleResult(paths, moment, tuple(warnings))
