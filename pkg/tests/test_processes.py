import numpy as np
import pytest

from tailrv.empirics import EmpiricalCDF, conditional_exceedance, dkw_epsilon, hill_estimator, ks_compare, ph_ratio
from tailrv.errors import InvalidSigmaError, NonPSDKernelError
from tailrv.grid import CadlagPath, GridSpec
from tailrv.mc import sample_mean
from tailrv.processes import (BrownResnickSpec, DeHaanConfig, GaussianSpec, brown_resnick_from_gaussian,
                              brown_resnick_representer, brown_resnick_tail_family, cholesky_jitter,
                              kernel_matrix, random_scale, sample_brown_resnick_spectral,
                              sample_dehaan_maxstable, sample_gaussian, sample_scaled_pareto,
                              transform_scale_shift)
from tailrv.rng import concat, derive_rng, map_workers
from tailrv.tail import ParetoSampler, RepresenterSampler, constant_representer, site_norms, spectral_from_Y

G5 = GridSpec.line(5, 0.0, 1.25)  # points 0, .25, .5, .75, 1


def test_kernels():
    C = kernel_matrix(G5.points, "brownian")
    np.testing.assert_allclose(C, np.minimum.outer(G5.points[:, 0], G5.points[:, 0]), atol=1e-15)
    assert np.all(kernel_matrix(G5.points, "zero") == 0)
    se = kernel_matrix(G5.points, "squared_exponential", variance=2.5, length_scale=0.3)
    np.testing.assert_allclose(np.diag(se), 2.5)
    f = kernel_matrix(G5.points, "fbm", hurst=0.5)
    np.testing.assert_allclose(f, C, atol=1e-15)
    cal = kernel_matrix(G5.points, lambda s, t: np.eye(len(s)))
    assert np.array_equal(cal, np.eye(5))
    with pytest.raises(ValueError):
        kernel_matrix(G5.points, "matern")


def test_cholesky_ladder_and_errors():
    C = kernel_matrix(G5.points, "brownian")  # zero variance at t = 0
    L = cholesky_jitter(C)
    assert np.all(L[0] == 0)
    np.testing.assert_allclose(L @ L.T, C, atol=1e-12)
    with pytest.raises(NonPSDKernelError):
        cholesky_jitter(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(NonPSDKernelError):
        cholesky_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NonPSDKernelError):
        cholesky_jitter(np.diag([1.0, -1.0]))


def test_zero_kernel_paths():
    v = sample_gaussian(GaussianSpec(G5, "zero"), 10)
    assert np.all(v == 0)


def test_brownian_variance_at_one():
    v = sample_gaussian(GaussianSpec(G5, "brownian"), 100_000, seed=1)[:, 4, 0]
    est = sample_mean(v ** 2)
    assert abs(est.value - 1.0) <= 3 * est.stderr


def test_squared_exponential_diagonal():
    v = sample_gaussian(GaussianSpec(G5, "squared_exponential", {"variance": 2.5}), 100_000, seed=2)
    for i in (0, 3):
        est = sample_mean(v[:, i, 0] ** 2)
        assert abs(est.value - 2.5) <= 3 * est.stderr


def test_cross_correlation():
    g = GridSpec.line(3, dim_x=2)
    spec = GaussianSpec(g, "squared_exponential", cross=np.array([[1.0, 0.6], [0.6, 1.0]]))
    v = sample_gaussian(spec, 50_000, seed=3)
    r = np.corrcoef(v[:, 1, 0], v[:, 1, 1])[0, 1]
    assert abs(r - 0.6) < 0.02
    with pytest.raises(NonPSDKernelError):
        GaussianSpec(g, "zero", cross=np.array([[2.0, 0], [0, 1.0]])).cross_matrix


def test_brown_resnick_pinned_and_moment():
    for alpha in (1.0, 2.0):
        spec = BrownResnickSpec(GaussianSpec(G5, "brownian"), alpha)
        Z = sample_brown_resnick_spectral(spec, 100_000, seed=4)
        assert np.all(Z[:, 0] == 1.0)
        for i in (2, 4):
            est = sample_mean(Z[:, i, 0] ** alpha)
            assert abs(est.value - 1.0) <= 3 * est.stderr


def test_alpha_reparameterization():
    g = GaussianSpec(G5, "brownian")
    V = sample_gaussian(g, 100, seed=5)
    z1 = brown_resnick_from_gaussian(V, g.variance, 1.0)
    z2 = brown_resnick_from_gaussian(V, g.variance, 2.0)
    np.testing.assert_allclose(z2, z1 * np.exp(-0.5 * g.variance), rtol=1e-14)


def test_multicomponent_family_uses_resampling():
    g = GridSpec.line(6, dim_x=2)
    spec = BrownResnickSpec(GaussianSpec(g, "brownian", cross=np.array([[1, .3], [.3, 1]])), 1.0)
    fam = brown_resnick_tail_family(spec, n_pilot=5000)
    y = fam.sample_Y(3, 200, seed=1)
    assert y.shape == (200, 6, 2) and np.all(site_norms(g, y, 3) >= 1)
    assert brown_resnick_representer(spec).p_exact is None


# de Haan ----------------------------------------------------------------


def test_dehaan_constant_is_frechet():
    Z = constant_representer(G5, 1.0, 1.5)
    res = sample_dehaan_maxstable(DeHaanConfig(Z), 100_000, seed=6)
    assert np.all(res.paths == res.paths[:, :1])
    cdf = lambda x: np.exp(-np.asarray(x) ** -1.5)
    assert EmpiricalCDF(res.paths[:, 2, 0]).sup_distance(cdf) <= dkw_epsilon(100_000)
    assert not res.truncated.any()


def test_dehaan_max_stability_two_copies():
    g = GridSpec.line(8, -0.5, 0.5)
    Z = brown_resnick_representer(BrownResnickSpec(GaussianSpec(g, "brownian", {"origin": -0.5})))
    cfg = DeHaanConfig(Z)
    X = sample_dehaan_maxstable(cfg, 20_000, seed=1).paths
    A = sample_dehaan_maxstable(cfg, 20_000, seed=2).paths
    B = sample_dehaan_maxstable(cfg, 20_000, seed=3).paths
    M = np.maximum(A, B) / 2.0
    for i in (0, 4, 7):
        assert ks_compare(M[:, i, 0], X[:, i, 0]).passed


def test_truncation_tolerance_monotone():
    g = GridSpec.line(8)
    Z = brown_resnick_representer(BrownResnickSpec(GaussianSpec(g, "brownian")))
    terms = [sample_dehaan_maxstable(DeHaanConfig(Z, truncation_tol=tol), 300, seed=7).terms
             for tol in (1.0, 0.3, 0.05)]
    assert np.all(terms[0] <= terms[1]) and np.all(terms[1] <= terms[2])
    assert terms[2].sum() > terms[0].sum()


def test_dehaan_max_terms_flag():
    Z = brown_resnick_representer(BrownResnickSpec(GaussianSpec(G5, "brownian")))
    res = sample_dehaan_maxstable(DeHaanConfig(Z, truncation_tol=1e-6, max_terms=3), 50)
    assert res.truncated.all() and np.all(res.terms == 3)
    with pytest.raises(ValueError):
        DeHaanConfig(Z, truncation_tol=0.0)


# Pareto scaling and transforms ------------------------------------------


def test_scaled_constant_is_pareto():
    X, R = sample_scaled_pareto(constant_representer(G5, 1.0, 2.0), 1000, seed=8, return_radius=True)
    assert np.array_equal(X[:, :, 0], np.repeat(R[:, None], 5, axis=1))


def test_scaled_norm_factorizes():
    Z = brown_resnick_representer(BrownResnickSpec(GaussianSpec(G5, "brownian")))
    X, R = sample_scaled_pareto(Z, 1000, seed=9, return_radius=True)
    z = concat(map_workers(lambda c, s: Z.sample(s("Z"), c), 1000, 9, 1, "rz"))
    assert np.array_equal(site_norms(G5, X, 3), R * site_norms(G5, z, 3))


def test_breiman_tail_ratio():
    g = GridSpec.line(4)
    s = np.array([1.0, 2.0, 0.5, 1.0])
    Z = RepresenterSampler(g, 1.0, lambda rng, n: s[None, :, None] * np.abs(rng.standard_normal((n, 1, 1))))
    X = sample_scaled_pareto(Z, 400_000, seed=10)
    z = np.quantile(site_norms(g, X, 0), 0.999)
    tab = ph_ratio(X, g, 1, 0, [z])
    val, se = tab.value[0, 0], tab.stderr[0, 0]
    assert abs(val - 2.0) <= 3 * se


def test_transform_identity_and_spectral_invariance():
    Y = brown_resnick_tail_family(BrownResnickSpec(GaussianSpec(G5, "brownian"))).sample_Y(2, 100)
    assert np.array_equal(transform_scale_shift(Y, np.ones(5)), Y)
    two = transform_scale_shift(Y, np.full(5, 2.0))
    assert np.array_equal(spectral_from_Y(two, 2, grid=G5), spectral_from_Y(Y, 2, grid=G5))
    f = CadlagPath.constant(G5, 1.0)
    assert transform_scale_shift(f, np.ones(5), 1.0) == f * 2.0
    with pytest.raises(InvalidSigmaError):
        transform_scale_shift(Y, np.r_[1.0, 0.0, 1.0, 1.0, 1.0])


def test_additive_shift_negligible():
    g = GridSpec.line(4)
    Z = brown_resnick_representer(BrownResnickSpec(GaussianSpec(g, "brownian")))
    X = transform_scale_shift(sample_scaled_pareto(Z, 400_000, seed=11), np.ones(4), 1.0)
    props = []
    for q in (0.99, 0.998):
        Y, _ = conditional_exceedance(X, g, 2, quantile=q)
        hit = site_norms(g, Y, 3) > 1.0
        props.append((hit.mean(), hit.std(ddof=1) / np.sqrt(hit.size)))
    (a, sa), (b, sb) = props
    assert abs(a - b) <= 3 * np.hypot(sa, sb)


def test_random_scale():
    Xs = RepresenterSampler(G5, 1.5, lambda rng, n: np.ones((n, 5, 1)) * ParetoSampler(1.5).sample(rng, n)[:, None, None])
    ones = lambda rng, n: np.ones((n, 5))
    res = random_scale(Xs, ones, 1000, 1.5, seed=12)
    direct = concat(map_workers(lambda c, s: Xs.sample(s("X"), c), 1000, 12, 1, "sigma"))
    assert np.array_equal(res.paths, direct) and res.warnings == ()
    unif = lambda rng, n: np.repeat(rng.uniform(0.5, 2.0, (n, 1)), 5, axis=1)
    res = random_scale(Xs, unif, 100_000, 1.5, seed=13)
    a, (lo, hi) = hill_estimator(site_norms(G5, res.paths, 2), 1000)
    assert lo <= 1.5 <= hi
    zero = random_scale(Xs, lambda rng, n: np.zeros((n, 5)), 10, 1.5)
    assert "sigma_vanishes" in zero.warnings
