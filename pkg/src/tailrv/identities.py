"""Structural identities of tail measures, checked by Monte Carlo.

Each identity compares two independently estimated sides; a report passes
when ``|L - R| ≤ threshold · sqrt(se_L² + se_R²) + atol`` with a tiny
relative ``atol`` absorbing float noise when both sides are exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fl
from .empirics import ks_compare
from .mc import MCEstimate, combined_stderr, sample_mean
from .tail import (RepresenterSampler, TailProcessFamily, representer_functional, shift_values,
                   site_norms, spectral_from_Y)

PANEL_VERSION = 1
ATOL_REL = 1e-12


@dataclass(frozen=True)
class IdentityReport:
    identity: str
    params: dict
    left: MCEstimate
    right: MCEstimate
    threshold: float = 3.0
    kind: str = "mc"  # "mc": two estimates; "ks": statistic vs critical value

    @property
    def delta(self) -> float:
        return self.left.value - self.right.value

    @property
    def stderr(self) -> float:
        return combined_stderr(self.left, self.right)

    @property
    def discrepancy(self) -> float:
        """``Δ`` in combined-stderr units (0 or inf when both sides are exact)."""
        if self.kind == "ks":
            return self.left.value / self.right.value
        se = self.stderr
        if se > 0:
            return self.delta / se
        return 0.0 if abs(self.delta) <= self._atol else math.copysign(math.inf, self.delta)

    @property
    def _atol(self) -> float:
        return ATOL_REL * max(1.0, abs(self.left.value), abs(self.right.value))

    @property
    def passed(self) -> bool:
        if self.kind == "ks":
            return self.left.value <= self.right.value
        return abs(self.delta) <= self.threshold * self.stderr + self._atol

    def to_dict(self) -> dict:
        disc = self.discrepancy
        return {"identity": self.identity, "params": self.params, "kind": self.kind,
                "left": self.left.to_dict(), "right": self.right.to_dict(),
                "discrepancy": disc if math.isfinite(disc) else str(disc),
                "threshold": self.threshold, "passed": self.passed}

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        p = ",".join(f"{k}={v}" for k, v in self.params.items())
        return (f"{mark}  {self.identity:<8} {p:<40} L={self.left.value:.6g} "
                f"R={self.right.value:.6g} disc={self.discrepancy:+.3f}")


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def reports_table(reports) -> str:
    return "\n".join(r.line() for r in reports)


@dataclass(frozen=True)
class SuiteConfig:
    h: object
    t: object
    xs: tuple = (0.5, 1.0, 2.0)
    n: int = 100_000
    eps: float = 1.0
    threshold: float = 3.0
    seed: int = 0
    workers: int = 1
    shift: float | None = None  # lattice shift for the stationarity report
    fidi_offsets: tuple = (-1, 0, 1)  # grid offsets compared in the shift report
    include: tuple = ("tiltY", "tsf", "tsf2", "spd", "mada0", "kksuter", "shiftY")


def _est(vals, scale, cfg) -> MCEstimate:
    return sample_mean(vals, cfg.seed, cfg.workers, scale=scale)


def identity_suite(Z: RepresenterSampler | None, family: TailProcessFamily,
                   config: SuiteConfig) -> list:
    """Reports over the fixed functional panel (version :data:`PANEL_VERSION`).

    ``tiltY`` (3 x-values × 3 functionals), ``tsf`` (both directions × 3),
    ``tsf2`` (3), ``spd`` (3), ``mada0`` (3), ``kksuter`` (1) and, when
    ``config.shift`` is set, ``shiftY`` (1).  ``spd`` and ``mada0`` need ``Z``.
    """
    cfg = config
    grid, alpha, norm = family.grid, family.alpha, family.norm
    h, t = grid.site(cfg.h), grid.site(cfg.t)
    ph, pt = float(family.p[h]), float(family.p[t])
    panel = fl.builtin_panel(grid, h, t, norm)
    panel0 = fl.builtin_panel_0hom(grid, h, t, norm)
    panel_a = [fl.min_power(G, grid, h, t, alpha, norm) for G in panel0]
    inc = set(cfg.include)

    Yh = family.sample_Y(h, cfg.n, seed=cfg.seed, workers=cfg.workers, tag="suite")
    Yt = family.sample_Y(t, cfg.n, seed=cfg.seed, workers=cfg.workers, tag="suite")
    Th = spectral_from_Y(Yh, h, norm, grid)
    Tt = spectral_from_Y(Yt, t, norm, grid)
    nrm = {(a, b): site_norms(grid, Y, b, norm=norm)
           for a, Y in (("h", Yh), ("t", Yt)) for b in (h, t)}
    out = []

    def add(name, params, left, right, kind="mc"):
        out.append(IdentityReport(name, params, left, right, cfg.threshold, kind))

    if "tiltY" in inc:
        for x in cfg.xs:
            for G in panel:
                L = _est(G.fn(x * Yh) * (x * nrm["h", t] > 1), ph, cfg)
                R = _est(G.fn(Yt) * (nrm["t", h] > x), pt * x ** alpha, cfg)
                add("tiltY", {"h": h, "t": t, "x": x, "H": G.name}, L, R)

    if "tsf" in inc:
        th_t = site_norms(grid, Th, t, norm=norm)
        tt_h = site_norms(grid, Tt, h, norm=norm)
        for (a, b, A, B, pa, pb, na, nb) in ((h, t, Th, Tt, ph, pt, th_t, tt_h),
                                            (t, h, Tt, Th, pt, ph, tt_h, th_t)):
            for G in panel0:
                L = _est(na ** alpha * G.fn(A), pa, cfg)
                R = _est((nb != 0) * G.fn(B), pb, cfg)
                add("tsf", {"h": a, "t": b, "H": G.name}, L, R)

    if "tsf2" in inc:
        th_t = site_norms(grid, Th, t, norm=norm)
        tt_h = site_norms(grid, Tt, h, norm=norm)
        for G in panel_a:
            L = _est((th_t != 0) * G.fn(Th), ph, cfg)
            R = _est((tt_h != 0) * G.fn(Tt), pt, cfg)
            add("tsf2", {"h": h, "t": t, "H": G.name}, L, R)

    if Z is not None and ({"spd", "mada0"} & inc):
        z = Z.draw(cfg.n, cfg.seed, cfg.workers, tag="suite_spd")
        zh = site_norms(grid, z, h, norm=Z.norm)
        if "spd" in inc:
            for G in panel0:
                L = _est(zh ** alpha * G.fn(z), 1.0, cfg)
                R = _est(G.fn(Th), ph, cfg)
                add("spd", {"h": h, "H": G.name}, L, R)
        if "mada0" in inc:
            for G in panel:
                L = representer_functional(Z, G, h, cfg.eps, cfg.n, seed=cfg.seed,
                                           workers=cfg.workers, tag="suite_mada0")
                R = _est(G.fn(cfg.eps * Yh), cfg.eps ** -alpha * ph, cfg)
                add("mada0", {"h": h, "eps": cfg.eps, "H": G.name}, L, R)

    if "kksuter" in inc:
        ok = float(np.mean((nrm["h", h] > 1) & (np.abs(site_norms(grid, Th, h, norm=norm) - 1) <= 1e-12)))
        add("kksuter", {"h": h}, MCEstimate(ok, 0.0, cfg.n, cfg.seed),
            MCEstimate(1.0, 0.0, cfg.n, cfg.seed))

    if cfg.shift is not None and "shiftY" in inc:
        out.append(_shift_report(family, h, cfg))
    return out


def _shift_report(family, h, cfg) -> IdentityReport:
    """``Y^[h+s]`` against ``B^s Y^[h]``: two-sample KS at a few coordinates near ``h+s``."""
    grid = family.grid
    k = int(round(cfg.shift / grid.step[0]))
    hs = h + k
    Y0 = family.sample_Y(h, cfg.n, seed=cfg.seed, workers=cfg.workers, tag="shift_a")
    Y1 = family.sample_Y(hs, cfg.n, seed=cfg.seed, workers=cfg.workers, tag="shift_b")
    B = shift_values(grid, Y0, cfg.shift)
    results = [ks_compare(Y1[:, j, 0], B[:, j, 0])
               for j in (hs + off for off in cfg.fidi_offsets)
               if 0 <= j < grid.n_points and 0 <= j - k < grid.n_points]
    worst = max(results, key=lambda r: r.statistic / r.critical)
    return IdentityReport("shiftY", {"h": h, "shift": cfg.shift},
                          MCEstimate(worst.statistic, 0.0, cfg.n, cfg.seed),
                          MCEstimate(worst.critical, 0.0, cfg.n, cfg.seed), cfg.threshold, "ks")
