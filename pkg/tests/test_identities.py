import json
import math

import numpy as np
import pytest

from tailrv.grid import GridSpec
from tailrv.identities import SuiteConfig, identity_suite, reports_table, reports_to_json
from tailrv.processes import BrownResnickSpec, GaussianSpec, brown_resnick_representer, brown_resnick_tail_family
from tailrv.tail import constant_representer, family_from_representer

COUNTS = {"tiltY": 9, "tsf": 6, "tsf2": 3, "spd": 3, "mada0": 3, "kksuter": 1}


def _br(n=16, kernel="fbm"):
    g = GridSpec.line(n, -0.5, 0.5)
    spec = BrownResnickSpec(GaussianSpec(g, kernel, {"hurst": 0.5, "origin": 0.0}), 1.0)
    return brown_resnick_representer(spec), brown_resnick_tail_family(spec)


def test_constant_representer_exact():
    g = GridSpec.line(8)
    Z = constant_representer(g, 2.0, 1.5)
    fam = family_from_representer(Z)
    reports = identity_suite(Z, fam, SuiteConfig(h=2, t=5, n=2000, seed=1))
    assert {r.identity for r in reports} == set(COUNTS)
    for name, k in COUNTS.items():
        assert sum(r.identity == name for r in reports) == k
    assert all(r.passed for r in reports)
    for r in reports:
        if r.identity in ("tsf", "tsf2", "spd", "kksuter"):
            assert r.stderr == 0.0 and abs(r.delta) <= 1e-12 * max(1, abs(r.left.value))


def test_brown_resnick_suite_passes_and_fault_detected():
    Z, fam = _br()
    cfg = SuiteConfig(h=5, t=10, n=30_000, seed=3, shift=0.125)
    reports = identity_suite(Z, fam, cfg)
    assert len(reports) == 26
    assert all(r.passed for r in reports), reports_table([r for r in reports if not r.passed])
    bad = identity_suite(Z, fam.with_p(5, 1.5), SuiteConfig(h=5, t=10, n=30_000, seed=3,
                                                            include=("tiltY",)))
    assert sum(not r.passed for r in bad) >= 1


def test_report_serialization():
    Z, fam = _br(8)
    reports = identity_suite(Z, fam, SuiteConfig(h=2, t=4, n=500, include=("tiltY", "kksuter")))
    data = json.loads(reports_to_json(reports))
    assert len(data) == 10
    assert {"identity", "params", "left", "right", "discrepancy", "threshold", "passed"} <= set(data[0])
    assert reports_table(reports).count("\n") == 9
    assert all(math.isfinite(float(d["discrepancy"])) for d in data)
