"""Tail measures as executable objects.

A tail measure ``ν`` is given either by a stochastic representer ``Z``
(``ν[H] = E ∫ H(rZ) α r^{-α-1} dr``) or by a family of local tail processes
``Y^[h]`` with weights ``p_h``.  Everything here is Monte Carlo over seeded,
worker-split streams (see :mod:`tailrv.rng`).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (AlignmentError, DegenerateSiteError, RejectionCapError,
                     SupportMismatchError, ViolatedKksuterError, ZeroNormError)
from .functionals import Functional
from .grid import CadlagPath, GridSpec, apply_norm, grid_of_batch, resolve_mask
from .mc import DEFAULT_CAP, MCEstimate, clip_values, sample_mean
from .rng import concat, map_workers

DEGENERATE_REL = 1e-12


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValueError(f"tail index must be a positive real, got {alpha}")
    return alpha


@dataclass(frozen=True)
class ParetoSampler:
    """α-Pareto radius: ``P(R > t) = t^-α`` for ``t ≥ 1``."""

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # 1 - U lies in (0, 1], so every draw is >= 1
        return (1.0 - rng.random(n)) ** (-1.0 / self.alpha)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1.0, 0.0, 1.0 - np.maximum(t, 1.0) ** -self.alpha)


def site_norms(grid: GridSpec, values, h=None, K=None, norm: str = "sup") -> np.ndarray:
    """``‖f‖_h`` for each path of a batch, or ``f*_K`` when ``K`` is given."""
    values = np.asarray(values, dtype=float)
    if K is not None:
        mask = resolve_mask(grid, K)
        if not mask.any():
            return np.zeros(values.shape[0])
        return apply_norm(values[:, mask], norm).max(axis=1)
    return apply_norm(values[:, grid.site(h)], norm)


def _scale(c, values):
    return np.asarray(c)[:, None, None] * values


@dataclass(frozen=True)
class RepresenterSampler:
    """Seeded source of representer paths ``Z``.

    ``generator(rng, n)`` returns values of shape ``(n, n_points, dim_x)``.
    Paths with ``Z*`` zero over ``window`` are rejected; more than
    ``max_tries * n`` raw draws for ``n`` accepted ones raises.
    ``p_exact`` optionally holds known ``E‖Z‖_h^α`` per grid point.
    """

    grid: GridSpec
    alpha: float
    generator: Callable
    norm: str = "sup"
    anchor: int = 0
    window: Optional[np.ndarray] = None
    max_tries: int = 100
    p_exact: Optional[np.ndarray] = None
    name: str = "Z"

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    def _raw(self, rng, n):
        v = np.asarray(self.generator(rng, n), dtype=float)
        return v.reshape(n, self.grid.n_points, self.grid.dim_x)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        n = int(n)
        mask = resolve_mask(self.grid, self.window)
        parts, got, drawn = [], 0, 0
        while got < n:
            need = n - got
            batch = self._raw(rng, need)
            drawn += need
            ok = apply_norm(batch[:, mask], self.norm).max(axis=1) > 0
            if not parts and ok.all():
                return batch
            parts.append(batch[ok])
            got += int(ok.sum())
            if got < n and drawn >= self.max_tries * max(n, 1):
                raise RejectionCapError(
                    f"{self.name}: only {got} of {n} draws nonzero after {drawn} attempts")
        return np.concatenate(parts)[:n]

    def draw(self, n: int, seed: int = 0, workers: int = 1, tag="Z") -> np.ndarray:
        parts = map_workers(lambda c, s: self.sample(s("Z"), c), n, seed, workers, tag)
        return concat(parts)

    def p_hat(self, h, n: int = 10_000, seed: int = 0, workers: int = 1) -> MCEstimate:
        """Estimate of ``p_h = E‖Z‖_h^α`` (exact value with stderr 0 if known)."""
        site = self.grid.site(h)
        if self.p_exact is not None:
            return MCEstimate(float(self.p_exact[site]), 0.0, 0, seed, 0, workers)
        z = self.draw(n, seed, workers, tag=("p_hat", site))
        return sample_mean(site_norms(self.grid, z, site, norm=self.norm) ** self.alpha,
                           seed, workers)


def constant_representer(grid: GridSpec, c, alpha: float, norm: str = "sup") -> RepresenterSampler:
    """Deterministic representer ``Z ≡ c`` (``c`` scalar, ℝᵈ vector or full value array)."""
    c = np.asarray(c, dtype=float)
    base = np.broadcast_to(c if c.ndim == 2 else np.atleast_1d(c), (grid.n_points, grid.dim_x)).copy()
    p = apply_norm(base, norm) ** check_alpha(alpha)
    return RepresenterSampler(grid, alpha, lambda rng, n: np.broadcast_to(base, (n,) + base.shape).copy(),
                              norm=norm, p_exact=p, name=f"const({c.tolist()})")


def representer_functional(Z: RepresenterSampler, H: Functional, h=None, eps: float = 1.0,
                           n: int = 10_000, *, K=None, seed: int = 0, workers: int = 1,
                           cap: float = DEFAULT_CAP, tag="rep") -> MCEstimate:
    """Estimate ``∫ H(f) 1{‖f‖_h > ε} ν(df) = ε^-α E[‖Z‖_h^α H((εR/‖Z‖_h) Z)]``.

    With ``K`` the anchor norm ``‖·‖_h`` is replaced by ``f*_K``, giving
    ``∫ H(f) 1{f*_K > ε} ν(df)``.  Draws with zero anchor norm contribute 0.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid, alpha = Z.grid, Z.alpha
    pareto = ParetoSampler(alpha)

    def job(c, streams):
        z = Z.sample(streams("Z"), c)
        r = pareto.sample(streams("R"), c)
        nz = site_norms(grid, z, h, K, Z.norm)
        pos = nz > 0
        out = np.zeros(c)
        if pos.any():
            hv = H.fn(_scale(eps * r[pos] / nz[pos], z[pos]))
            out[pos] = nz[pos] ** alpha * hv
        return out, int(pos.sum())

    parts = map_workers(job, n, seed, workers, tag)
    if sum(k for _, k in parts) == 0:
        raise DegenerateSiteError("every draw has zero norm at the anchor")
    vals, clipped = clip_values(concat([v for v, _ in parts]), cap)
    return sample_mean(vals, seed, workers, scale=eps ** -alpha, clipped=clipped)


@dataclass(frozen=True)
class WeightedSample:
    """Importance-weighted draws of ``Y^[h]``; weights need not be normalized."""

    grid: GridSpec
    paths: np.ndarray
    weights: np.ndarray
    site: int
    alpha: float
    norm: str = "sup"
    seed: int = 0

    @property
    def normalized(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    @property
    def ess(self) -> float:
        w = self.normalized
        return float(1.0 / np.sum(w * w))

    def p_hat(self) -> MCEstimate:
        return sample_mean(self.weights, self.seed)

    def resample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """Multinomial resampling to ``m`` unweighted draws."""
        idx = rng.choice(len(self.weights), size=int(m), p=self.normalized)
        return self.paths[idx]

    def to_csv(self, stream, meta: dict | None = None) -> None:
        """Long format: ``sample_id, weight, t_1.., x_1..``, one row per grid cell."""
        for k, v in (meta or {}).items():
            stream.write(f"# {k}={v}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["sample_id", "weight"] + [f"t_{i + 1}" for i in range(self.grid.dim_t)]
                   + [f"x_{i + 1}" for i in range(self.grid.dim_x)])
        pts = self.grid.points
        for s, (vals, wt) in enumerate(zip(self.paths, self.weights)):
            for p, v in zip(pts, vals):
                w.writerow([str(s), repr(float(wt))] + [repr(float(a)) for a in p]
                           + [repr(float(a)) for a in v])


def tilt_sample_Y(Z: RepresenterSampler, h, n: int, *, seed: int = 0, workers: int = 1,
                  tag="tilt") -> WeightedSample:
    """Pairs ``((R/‖Z_i‖_h) Z_i, ‖Z_i‖_h^α)``: weighted draws from the law of ``Y^[h]``."""
    grid, alpha = Z.grid, Z.alpha
    site = grid.site(h)
    pareto = ParetoSampler(alpha)

    def job(c, streams):
        z = Z.sample(streams("Z"), c)
        r = pareto.sample(streams("R"), c)
        nz = site_norms(grid, z, site, norm=Z.norm)
        pos = nz > 0
        paths = np.zeros_like(z)
        paths[pos] = _scale(r[pos] / nz[pos], z[pos])
        return paths, nz ** alpha

    parts = map_workers(job, n, seed, workers, (tag, site))
    paths = concat([p for p, _ in parts])
    weights = concat([w for _, w in parts])
    if not np.any(weights > 0):
        raise DegenerateSiteError(f"p_h is zero at site {site}: all tilt weights vanish")
    return WeightedSample(grid, paths, weights, site, alpha, Z.norm, seed)


def spectral_from_Y(Y, h, norm: str = "sup", grid: GridSpec | None = None):
    """``Θ = Y / ‖Y‖_h`` for a path or for a batch (``grid`` required for batches)."""
    if isinstance(Y, CadlagPath):
        out = spectral_from_Y(Y.values[None], h, norm, Y.grid)
        return CadlagPath(Y.grid, out[0])
    Y = np.asarray(Y, dtype=float)
    nz = site_norms(grid, Y, h, norm=norm)
    if np.any(nz == 0):
        raise ZeroNormError("‖Y‖_h = 0: no spectral normalization possible")
    return Y / nz[:, None, None]


def y_from_spectral(theta, R):
    """``Y = R · Θ`` for a path (scalar ``R``) or a batch (``R`` of length n)."""
    if isinstance(theta, CadlagPath):
        return theta * float(R)
    return _scale(np.asarray(R, dtype=float), np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class TailProcessFamily:
    """Local tail processes ``Y^[h]`` with weights ``p_h`` and site weights ``q_t``.

    ``sampler(site, rng, n)`` returns ``(n, n_points, dim_x)`` draws of
    ``Y^[site]``.  Sites with ``p_h`` below ``1e-12 · max p`` are degenerate
    and excluded from the ``q`` mixture.
    """

    grid: GridSpec
    alpha: float
    p: np.ndarray
    q: np.ndarray
    sampler: Callable
    norm: str = "sup"
    name: str = "family"
    corrupted: dict = field(default_factory=dict)

    spectral = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        P = self.grid.n_points
        p = np.broadcast_to(np.asarray(self.p, dtype=float), (P,)).copy()
        q = np.broadcast_to(np.asarray(self.q, dtype=float), (P,)).copy()
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("p_h must be finite and nonnegative")
        if not np.any(p > 0):
            raise DegenerateSiteError("a tail process family needs p_h > 0 at some site")
        if np.any(q < 0) or not np.isfinite(q.sum()):
            raise ValueError("q_t must be nonnegative and summable")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def sites(self) -> np.ndarray:
        return np.flatnonzero(self.p > DEGENERATE_REL * self.p.max())

    @property
    def q_normalized(self) -> np.ndarray:
        q = np.zeros_like(self.q)
        s = self.sites
        q[s] = self.q[s]
        if not q.sum() > 0:
            raise DegenerateSiteError("q vanishes on every nondegenerate site")
        return q / q.sum()

    def _check_site(self, h) -> int:
        site = self.grid.site(h)
        if site not in set(self.sites.tolist()):
            raise DegenerateSiteError(f"site {site} has p_h = 0 (or below the degeneracy cut)")
        return site

    def _draw(self, site: int, rng, n: int) -> np.ndarray:
        y = np.asarray(self.sampler(site, rng, n), dtype=float)
        y = y.reshape(n, self.grid.n_points, self.grid.dim_x)
        nz = site_norms(self.grid, y, site, norm=self.norm)
        if np.any(nz < 1.0 - 1e-12):
            raise ViolatedKksuterError(f"draw of Y at site {site} has ‖Y‖_h <= 1")
        return y

    def sample_Y(self, h, n: int, *, seed: int = 0, workers: int = 1, tag="Y") -> np.ndarray:
        site = self._check_site(h)
        return concat(map_workers(lambda c, s: self._draw(site, s("Y"), c), n, seed, workers,
                                  (tag, site)))

    def sample_theta(self, h, n: int, *, seed: int = 0, workers: int = 1, tag="Y") -> np.ndarray:
        site = self._check_site(h)
        return spectral_from_Y(self.sample_Y(site, n, seed=seed, workers=workers, tag=tag),
                               site, self.norm, self.grid)

    def with_p(self, h, factor: float) -> "TailProcessFamily":
        """Copy with ``p_h`` multiplied by ``factor`` (used for fault injection)."""
        site = self.grid.site(h)
        p = self.p.copy()
        p[site] *= factor
        return replace(self, p=p, corrupted={**self.corrupted, site: factor})


@dataclass(frozen=True)
class SpectralTailFamily(TailProcessFamily):
    """Family given through spectral processes: ``sampler`` emits ``Θ^[h]`` and
    ``Y^[h] = R Θ^[h]`` with an independent α-Pareto ``R``."""

    spectral = True

    def draw_theta(self, site: int, rng, n: int) -> np.ndarray:
        th = np.asarray(self.sampler(site, rng, n), dtype=float)
        th = th.reshape(n, self.grid.n_points, self.grid.dim_x)
        nz = site_norms(self.grid, th, site, norm=self.norm)
        if np.any(np.abs(nz - 1.0) > 1e-12):
            raise ViolatedKksuterError(f"spectral draw at site {site} has ‖Θ‖_h != 1")
        return th

    def _draw(self, site: int, rng, n: int) -> np.ndarray:
        th = self.draw_theta(site, rng, n)
        return y_from_spectral(th, ParetoSampler(self.alpha).sample(rng, n))

    def sample_theta(self, h, n: int, *, seed: int = 0, workers: int = 1, tag="Y") -> np.ndarray:
        site = self._check_site(h)
        return concat(map_workers(lambda c, s: self.draw_theta(site, s("Y"), c), n, seed,
                                  workers, (tag, site)))


def family_from_representer(Z: RepresenterSampler, q=None, *, n_pilot: int = 100_000,
                            pool_factor: int = 8, seed: int = 0) -> TailProcessFamily:
    """Tail process family of ``ν_Z`` by sampling-importance-resampling.

    ``p_h`` comes from ``Z.p_exact`` when known, else from a pilot run.  Each
    request for ``n`` draws at site ``h`` tilts a fresh pool of
    ``pool_factor · n`` representer draws and resamples ``n`` of them.
    """
    grid, alpha = Z.grid, Z.alpha
    if Z.p_exact is not None:
        p = np.asarray(Z.p_exact, dtype=float)
    else:
        z = Z.draw(n_pilot, seed, tag="pilot")
        p = (apply_norm(z, Z.norm) ** alpha).mean(axis=0)
    q = np.ones(grid.n_points) if q is None else q
    pareto = ParetoSampler(alpha)

    def sampler(site, rng, n):
        pool = Z.sample(rng, pool_factor * n)
        nz = site_norms(grid, pool, site, norm=Z.norm)
        w = nz ** alpha
        if not w.sum() > 0:
            raise DegenerateSiteError(f"tilt pool at site {site} has zero weight")
        idx = rng.choice(len(pool), size=n, p=w / w.sum())
        r = pareto.sample(rng, n)
        return _scale(r / nz[idx], pool[idx])

    return TailProcessFamily(grid, alpha, p, q, sampler, Z.norm, name=f"tilt({Z.name})")


def build_representer_ZN(family: TailProcessFamily) -> RepresenterSampler:
    """Representer ``Z_N = p_N^{1/α} Y^[N] / S^q(Y^[N])^{1/α}`` with ``N ~ q``.

    ``q`` is the family's site weights normalized over nondegenerate sites
    and ``S^q(f) = Σ_t ‖f‖_t^α q_t`` (counting measure on the grid).
    """
    grid, alpha = family.grid, family.alpha
    qn = family.q_normalized
    P = grid.n_points

    def gen(rng, n):
        N = rng.choice(P, size=n, p=qn)
        out = np.empty((n, P, grid.dim_x))
        for site in np.unique(N):
            idx = np.flatnonzero(N == site)
            y = family._draw(int(site), rng, idx.size)
            S = (apply_norm(y, family.norm) ** alpha) @ qn
            if np.any(S <= 0):
                raise ViolatedKksuterError("S^q(Y) = 0: not a tail process family")
            out[idx] = _scale((family.p[site] / S) ** (1.0 / alpha), y)
        return out

    return RepresenterSampler(grid, alpha, gen, family.norm, name=f"Z_N({family.name})")


def exceedance_e_K(f, K, q, norm: str = "sup", *, grid: GridSpec | None = None,
                   lam: float = 1.0):
    """``e_K(f) = Σ_{t ∈ K} 1{‖f(t)‖ > 1} q_t λ`` for a path or a batch."""
    if isinstance(f, CadlagPath):
        return float(exceedance_e_K(f.values[None], K, q, norm, grid=f.grid, lam=lam)[0])
    values = np.asarray(f, dtype=float)
    mask = resolve_mask(grid, K)
    q = np.broadcast_to(np.asarray(q, dtype=float), (grid.n_points,))
    exc = apply_norm(values[:, mask], norm) > 1.0
    return (exc * q[mask]).sum(axis=1) * lam


def _lambda(grid: GridSpec, measure: str) -> float:
    if measure == "counting":
        return 1.0
    if measure == "lebesgue":
        return grid.cell_volume
    raise ValueError("measure must be 'counting' or 'lebesgue'")


def _site_terms(family, K, fn, n, seed, workers, tag):
    """Per-site (weight, values) for sites of ``K``; ``fn(site, y, e)`` gives values."""
    grid = family.grid
    mask = resolve_mask(grid, K)
    qn = family.q_normalized

    terms = []
    for site in family.sites:
        if not mask[site]:
            continue
        y = family.sample_Y(int(site), n, seed=seed, workers=workers, tag=tag)
        e = exceedance_e_K(y, mask, qn, family.norm, grid=grid)
        if np.any(e <= 0):
            raise ViolatedKksuterError(f"e_K(Y) = 0 for a draw at site {site} inside K")
        terms.append((family.p[site] * qn[site], fn(site, y, e)))
    return terms


def measure_functional_local(family: TailProcessFamily, H: Functional, K, eps: float = 1.0,
                             n: int = 10_000, *, measure: str = "counting", seed: int = 0,
                             workers: int = 1, cap: float = DEFAULT_CAP, tag="local") -> MCEstimate:
    """Estimate ``ν[H] = ε^-α Σ_{t ∈ K} E[H(εY^[t]) / e_K(Y^[t])] p_t q_t λ``.

    ``n`` draws per site.  ``H`` must declare support ``(K_H, ε_H)`` with
    ``K_H ⊆ K`` and ``eps ≤ ε_H``.  Both λ choices give the same value; the
    cell volume cancels between the sum and ``e_K``.
    """
    grid = family.grid
    mask = resolve_mask(grid, K)
    if H.support is None:
        raise SupportMismatchError("H declares no support; cannot localise to K")
    kh, eps_h = H.support
    if np.any(kh & ~mask):
        raise SupportMismatchError("support K_H of H is not contained in K")
    if eps > eps_h:
        raise SupportMismatchError(f"eps={eps} exceeds the support level eps_H={eps_h}")
    lam = _lambda(grid, measure)
    clipped = 0

    def fn(site, y, e):
        nonlocal clipped
        v, c = clip_values(H.fn(eps * y) / (e * lam), cap)
        clipped += c
        return v

    terms = _site_terms(family, mask, fn, n, seed, workers, tag)
    scale = eps ** -family.alpha * lam
    value = float(scale * sum(w * float(np.mean(v)) for w, v in terms))
    var = sum((w * sample_mean(v).stderr) ** 2 for w, v in terms)
    return MCEstimate(value, scale * math.sqrt(var), n * len(terms), seed, clipped, workers)


@dataclass(frozen=True)
class BoundednessResult:
    estimate: MCEstimate
    passed: bool
    trajectory: tuple  # estimates at n/4, n/2, n

    def to_dict(self) -> dict:
        return {"estimate": self.estimate.to_dict(), "passed": self.passed,
                "trajectory": list(self.trajectory), "rigorous": False}


def compact_boundedness_check(obj, K, n: int = 10_000, *, seed: int = 0, workers: int = 1,
                              measure: str = "counting") -> BoundednessResult:
    """Finiteness diagnostic on ``K`` (a heuristic, not a proof).

    Representer route: ``E[(Z*_K)^α]``.  Family route:
    ``Σ_{t ∈ K} E[1 / e_K(Y^[t])] p_t q_t λ``.  Fails when the running
    estimate is non-finite or at least doubles between ``n/4`` and ``n``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if isinstance(obj, RepresenterSampler):
        z = obj.draw(n, seed, workers, tag="bounded")
        mask = resolve_mask(obj.grid, K)
        terms = [(1.0, site_norms(obj.grid, z, K=mask, norm=obj.norm) ** obj.alpha)]
    else:
        lam = _lambda(obj.grid, measure)
        terms = [(w * lam, 1.0 / (e * lam))
                 for w, e in _site_terms(obj, K, lambda s, y, e: e, n, seed, workers, "bounded")]

    def est(m):
        return float(sum(w * float(np.mean(v[:m])) for w, v in terms))

    value = est(n)
    se = math.sqrt(sum((w * sample_mean(v).stderr) ** 2 for w, v in terms))
    traj = (est(max(1, n // 4)), est(max(1, n // 2)), value)
    ok = math.isfinite(value) and not (traj[0] > 0 and value >= 2 * traj[0])
    return BoundednessResult(MCEstimate(value, se, n, seed, 0, workers), ok, traj)


def _lattice_steps(grid: GridSpec, h) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1:
        h = np.repeat(h, grid.dim_t)
    k = h / grid.step
    ki = np.rint(k)
    if np.any(np.abs(k - ki) > 1e-9):
        raise AlignmentError(f"shift {h.tolist()} is not a multiple of the grid step")
    return ki.astype(int)


def shift_values(grid: GridSpec, values, h, fill: float = 0.0) -> np.ndarray:
    """Batch backshift ``(B^h f)(t) = f(t - h)``; cells whose source leaves the window get ``fill``."""
    values = np.asarray(values, dtype=float)
    k = _lattice_steps(grid, h)
    arr = grid_of_batch(values, grid)
    out = np.full_like(arr, fill)
    src, dst = [slice(None)], [slice(None)]
    for ki, ni in zip(k, grid.resolution):
        if abs(ki) >= ni:
            return out.reshape(values.shape)
        src.append(slice(0, ni - ki) if ki >= 0 else slice(-ki, ni))
        dst.append(slice(ki, ni) if ki >= 0 else slice(0, ni + ki))
    out[tuple(dst)] = arr[tuple(src)]
    return out.reshape(values.shape)


def shift(f: CadlagPath, h, fill: float = 0.0) -> CadlagPath:
    return CadlagPath(f.grid, shift_values(f.grid, f.values[None], h, fill)[0])
