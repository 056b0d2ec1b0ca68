"""Statistical checks: Hill estimation, empirical tail processes and the
tightness / anti-concentration diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateSampleError, InsufficientExceedancesError
from .grid import GridSpec, apply_norm, resolve_mask
from .moduli import modulus_w_doubleprime_batch, modulus_w_prime_batch
from .tail import exceedance_e_K, site_norms

KS_LEVEL = 0.01


class EmpiricalCDF:
    """Right-continuous step CDF of a real sample."""

    def __init__(self, sample):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        if x.size == 0:
            raise DegenerateSampleError("empty sample")
        self.x = x
        self.n = x.size

    def __call__(self, t):
        return np.searchsorted(self.x, np.asarray(t, dtype=float), side="right") / self.n

    def quantile(self, p):
        """Left-continuous inverse ``inf{x : F(x) ≥ p}``."""
        p = np.asarray(p, dtype=float)
        idx = np.clip(np.ceil(p * self.n).astype(int) - 1, 0, self.n - 1)
        return self.x[idx]

    def sup_distance(self, cdf) -> float:
        """Kolmogorov distance to a continuous CDF."""
        F = np.asarray(cdf(self.x), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(max(np.max(i / self.n - F), np.max(F - (i - 1) / self.n)))


def dkw_epsilon(n: int, level: float = KS_LEVEL) -> float:
    """Half-width of the DKW band holding with probability ``1 - level``."""
    return math.sqrt(math.log(2.0 / level) / (2.0 * n))


def ks_critical_2samp(n: int, m: int, level: float = KS_LEVEL) -> float:
    """Asymptotic two-sample Kolmogorov–Smirnov critical value."""
    return float(stats.kstwobign.isf(level)) * math.sqrt((n + m) / (n * m))


def ks_2samp_stat(x, y) -> float:
    return float(stats.ks_2samp(np.ravel(x), np.ravel(y), method="asymp").statistic)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical


def ks_compare(x, y, level: float = KS_LEVEL) -> KSResult:
    x, y = np.ravel(x), np.ravel(y)
    return KSResult(ks_2samp_stat(x, y), ks_critical_2samp(x.size, y.size, level))


def hill_estimator(sample, k: int, z: float = 1.96):
    """Hill estimate ``k / Σ_{i≤k} ln(X_(i) / X_(k+1))`` over descending order
    statistics, with the interval ``α̂ (1 ± z/√k)``."""
    x = np.asarray(sample, dtype=float).ravel()
    if not 0 < k < x.size:
        raise ValueError("need 0 < k < sample size")
    if np.any(x <= 0):
        raise ValueError("Hill estimator needs positive values")
    top = -np.sort(-x)[: k + 1]
    denom = float(np.sum(np.log(top[:k] / top[k])))
    if denom == 0:
        raise DegenerateSampleError("top order statistics are tied")
    a = k / denom
    half = z / math.sqrt(k)
    return a, (a * (1 - half), a * (1 + half))


def conditional_exceedance(samples, grid: GridSpec, h, u: float | None = None, *,
                           quantile: float = 0.99, norm: str = "sup",
                           min_exceedances: int = 50):
    """``{X_i / u : ‖X_i‖_h > u}``, the empirical law approximating ``Y^[h]``.

    ``u`` defaults to the ``quantile`` of ``‖X‖_h``.  Rescaled paths whose
    norm rounds down to exactly 1 are dropped, so every output has norm > 1.
    Returns ``(paths, u)``.
    """
    X = np.asarray(samples, dtype=float)
    nh = site_norms(grid, X, h, norm=norm)
    if u is None:
        u = float(np.quantile(nh, quantile))
    sel = X[nh > u] / u
    sel = sel[site_norms(grid, sel, h, norm=norm) > 1.0]
    if len(sel) < min_exceedances:
        raise InsufficientExceedancesError(
            f"{len(sel)} exceedances above u={u}; need at least {min_exceedances}")
    return sel, u


def _ratio_stderr(a: int, b: int, c: int) -> float:
    """Delta-method stderr of ``a/b`` for counts of events A, B with overlap ``c``."""
    if b == 0:
        return math.nan
    r = a / b
    if a == 0:
        return 1.0 / b
    return r * math.sqrt(max(0.0, 1 / a + 1 / b - 2 * c / (a * b)))


def _ratio(num: np.ndarray, den: np.ndarray):
    a, b, c = int(num.sum()), int(den.sum()), int((num & den).sum())
    return (a / b if b else math.nan), _ratio_stderr(a, b, c)


@dataclass(frozen=True)
class DiagnosticTable:
    """Rows ``(eta, z, value, stderr)``; undefined cells hold NaN."""

    etas: tuple
    zs: tuple
    value: np.ndarray  # (len(etas), len(zs))
    stderr: np.ndarray
    name: str = "diagnostic"

    def rows(self):
        for i, eta in enumerate(self.etas):
            for j, z in enumerate(self.zs):
                yield eta, z, float(self.value[i, j]), float(self.stderr[i, j])

    def to_csv(self, stream, meta: dict | None = None) -> None:
        for k, v in (meta or {}).items():
            stream.write(f"# {k}={v}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["eta", "z", "value", "stderr"])
        for row in self.rows():
            w.writerow([repr(float(x)) for x in row])

    def to_dict(self) -> dict:
        return {"name": self.name, "columns": ["eta", "z", "value", "stderr"],
                "rows": [list(r) for r in self.rows()]}


def ph_ratio(samples, grid: GridSpec, h, t0, z_grid, norm: str = "sup") -> DiagnosticTable:
    """Curve ``z -> #{‖X‖_h > z} / #{‖X‖_{t0} > z}`` (single row, ``eta`` unused)."""
    X = np.asarray(samples, dtype=float)
    nh = site_norms(grid, X, h, norm=norm)
    n0 = site_norms(grid, X, t0, norm=norm)
    vals, ses = [], []
    for z in z_grid:
        v, s = _ratio(nh > z, n0 > z)
        vals.append(v)
        ses.append(s)
    return DiagnosticTable((math.nan,), tuple(float(z) for z in z_grid), np.array([vals]),
                           np.array([ses]), "ph_ratio")


def tightness_diagnostic(samples, grid: GridSpec, K, eps: float, t0, eta_grid, z_grid, *,
                         modulus: str = "w_prime", norm: str = "sup") -> DiagnosticTable:
    """``P(w(X, K, η) > εz) / P(‖X‖_{t0} > z)`` over ``(η, z)``.

    ``modulus`` is ``"w_prime"`` (one time axis) or ``"w_doubleprime"``
    (any number of axes, per-axis scan).  Both moduli grow with ``η``.
    """
    X = np.asarray(samples, dtype=float)
    n0 = site_norms(grid, X, t0, norm=norm)
    fn = {"w_prime": modulus_w_prime_batch, "w_doubleprime": modulus_w_doubleprime_batch}[modulus]
    val = np.full((len(eta_grid), len(z_grid)), np.nan)
    se = np.full_like(val, np.nan)
    for i, eta in enumerate(eta_grid):
        w = fn(grid, X, K, eta, norm)
        for j, z in enumerate(z_grid):
            val[i, j], se[i, j] = _ratio(w > eps * z, n0 > z)
    return DiagnosticTable(tuple(map(float, eta_grid)), tuple(map(float, z_grid)), val, se,
                           f"tightness_{modulus}")


def anticoncentration_diagnostic(samples, grid: GridSpec, K, eps: float, c: float, t0,
                                 eta_grid, z_grid, q=1.0, *, norm: str = "sup") -> DiagnosticTable:
    """``P(X*_K > cεz, e_K(X / εz) ≤ η) / P(‖X‖_{t0} > z)`` over ``(η, z)``."""
    if not c > 1:
        raise ValueError("c must exceed 1")
    X = np.asarray(samples, dtype=float)
    mask = resolve_mask(grid, K)
    sup = site_norms(grid, X, K=mask, norm=norm)
    n0 = site_norms(grid, X, t0, norm=norm)
    val = np.full((len(eta_grid), len(z_grid)), np.nan)
    se = np.full_like(val, np.nan)
    for j, z in enumerate(z_grid):
        e = exceedance_e_K(X / (eps * z), mask, q, norm, grid=grid)
        big = sup > c * eps * z
        for i, eta in enumerate(eta_grid):
            val[i, j], se[i, j] = _ratio(big & (e <= eta), n0 > z)
    return DiagnosticTable(tuple(map(float, eta_grid)), tuple(map(float, z_grid)), val, se,
                           "anticoncentration")


def jump_frequency(samples, grid: GridSpec, norm: str = "sup", tol: float = 0.0) -> np.ndarray:
    """Per grid point, the fraction of paths with ``‖f(t) - f(t-)‖ > tol`` along
    the first time axis (0 at the first point of each line)."""
    X = np.asarray(samples, dtype=float)
    arr = X.reshape((X.shape[0],) + grid.resolution + (X.shape[-1],))
    jumps = np.zeros(arr.shape[:-1], dtype=bool)
    jumps[:, 1:] = apply_norm(np.diff(arr, axis=1), norm) > tol
    return jumps.mean(axis=0).reshape(-1)
