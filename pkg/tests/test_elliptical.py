import numpy as np
import pytest
from scipy import stats

from stcopula import numerics
from stcopula.elliptical import (EllipticalCopula, conditional_sample_elliptical, elliptical_density,
                                 fit_elliptical, kendall_tau_matrix, sample_elliptical)
from stcopula.exceptions import DomainError, FitError
from stcopula.pair import PairCopula, pair_density


def equicorr(d, rho):
    return np.full((d, d), rho) + (1 - rho) * np.eye(d)


def test_identity_gaussian_density_is_one(rng):
    c = EllipticalCopula("gaussian", np.eye(3))
    assert np.allclose(elliptical_density(c, rng.random((20, 3))), 1.0)


def test_gaussian_density_at_center():
    c = EllipticalCopula("gaussian", [[1, 0.4], [0.4, 1]])
    assert abs(elliptical_density(c, [0.5, 0.5]) - 1 / np.sqrt(1 - 0.16)) < 1e-5


def test_density_oracle_from_scipy_joint(rng):
    # copula density = joint density / product of marginal densities
    sigma = np.array([[1, 0.3, -0.2], [0.3, 1, 0.5], [-0.2, 0.5, 1]])
    u = rng.uniform(0.02, 0.98, size=(25, 3))
    c = EllipticalCopula("gaussian", sigma)
    z = stats.norm.ppf(u)
    expect = stats.multivariate_normal(cov=sigma).pdf(z) / np.prod(stats.norm.pdf(z), axis=1)
    assert np.allclose(elliptical_density(c, u), expect, rtol=1e-10)
    nu = 3.0
    c = EllipticalCopula("t", sigma, nu)
    x = stats.t.ppf(u, nu)
    expect = stats.multivariate_t(shape=sigma, df=nu).pdf(x) / np.prod(stats.t.pdf(x, nu), axis=1)
    assert np.allclose(elliptical_density(c, u), expect, rtol=1e-8)


def test_bivariate_matches_pair_density(rng):
    u = rng.uniform(0.01, 0.99, size=(50, 2))
    for fam, nu in (("gaussian", None), ("t", 4.0)):
        c = EllipticalCopula(fam, [[1, -0.35], [-0.35, 1]], nu)
        pcop = PairCopula(fam, rho=-0.35, nu=nu)
        assert np.allclose(elliptical_density(c, u), pair_density(pcop, u[:, 0], u[:, 1]), rtol=1e-10)


def test_t_nests_gaussian():
    g = (np.arange(5) + 0.5) / 5
    uu = np.column_stack([a.ravel() for a in np.meshgrid(g, g)])
    s = [[1, 0.4], [0.4, 1]]
    ratio = elliptical_density(EllipticalCopula("t", s, 1e4), uu) / elliptical_density(EllipticalCopula("gaussian", s), uu)
    assert np.max(np.abs(ratio - 1)) < 1e-3


def test_validation():
    with pytest.raises(DomainError):
        EllipticalCopula("gaussian", [[1, 1.0], [1.0, 1]])
    with pytest.raises(DomainError):
        EllipticalCopula("gaussian", [[2, 0.1], [0.1, 1]])
    with pytest.raises(DomainError):
        EllipticalCopula("t", np.eye(2))
    with pytest.raises(DomainError):
        EllipticalCopula("clayton", np.eye(2))
    with pytest.raises(DomainError):
        elliptical_density(EllipticalCopula("gaussian", np.eye(2)), [0.5, 0.5, 0.5])


def test_sampling_tau():
    g = sample_elliptical(EllipticalCopula("gaussian", np.eye(3)), 10_000, 1)
    tau = kendall_tau_matrix(g)
    assert np.max(np.abs(tau[np.triu_indices(3, 1)])) < 0.03
    target = 2 / np.pi * np.arcsin(0.4)
    s = [[1, 0.4], [0.4, 1]]
    x = sample_elliptical(EllipticalCopula("gaussian", s), 10_000, 2)
    assert abs(stats.kendalltau(*x.T).statistic - target) < 0.02
    y = sample_elliptical(EllipticalCopula("t", s, 4.0), 10_000, 2)
    assert abs(stats.kendalltau(*y.T).statistic - target) < 0.02


def test_t_has_heavier_joint_tails():
    s = [[1, 0.4], [0.4, 1]]
    n = 200_000
    g = sample_elliptical(EllipticalCopula("gaussian", s), n, 5)
    t = sample_elliptical(EllipticalCopula("t", s, 4.0), n, 5)
    count = lambda x: int(np.sum((x[:, 0] < 0.01) & (x[:, 1] < 0.01)))
    assert count(t) > 1.5 * count(g)


def test_conditional_identity_is_uniform_and_independent():
    c = EllipticalCopula("gaussian", np.eye(3))
    for cond in ([0.01], [0.5], [0.99]):
        out = conditional_sample_elliptical(c.permuted([0, 1, 2]), cond, 10_000, 3)
        for j in range(2):
            assert stats.kstest(out[:, j], "uniform").statistic < 0.02


def test_conditional_gaussian_mean():
    c = EllipticalCopula("gaussian", [[1, 0.5], [0.5, 1]])
    n = 100_000
    for v, target in ((0.5, 0.0), (stats.norm.cdf(1.0), 0.5)):
        z = numerics.std_normal_quantile(conditional_sample_elliptical(c, [v], n, 8)[:, 0])
        se = z.std() / np.sqrt(n)
        assert abs(z.mean() - target) < 4 * se
        assert z.std() == pytest.approx(np.sqrt(0.75), rel=0.01)


def test_conditional_t_matches_pair_h_function():
    # the conditional cdf of u given v for a bivariate t copula is h(u | v)
    c = EllipticalCopula("t", [[1, 0.6], [0.6, 1]], 3.0)
    pcop = PairCopula("t", rho=0.6, nu=3.0)
    u = conditional_sample_elliptical(c, [0.1], 40_000, 9)[:, 0]
    grid = np.linspace(0.05, 0.95, 19)
    emp = np.searchsorted(np.sort(u), grid) / u.size
    assert np.max(np.abs(emp - pcop.h(grid, np.full_like(grid, 0.1)))) < 0.01


def test_conditional_domain():
    c = EllipticalCopula("gaussian", [[1, 0.5], [0.5, 1]])
    with pytest.raises(DomainError):
        conditional_sample_elliptical(c, [1.0], 10, 0)
    with pytest.raises(DomainError):
        conditional_sample_elliptical(c, [0.5, 0.5], 10, 0)


def test_fit_gaussian_recovery():
    x = sample_elliptical(EllipticalCopula("gaussian", equicorr(4, 0.4)), 5000, 21)
    fit = fit_elliptical("gaussian", x)
    off = fit.copula.corr[np.triu_indices(4, 1)]
    assert np.all((off >= 0.36) & (off <= 0.44))


def test_fit_t_recovers_nu():
    x = sample_elliptical(EllipticalCopula("t", equicorr(4, 0.4), 4.0), 5000, 22)
    assert fit_elliptical("t", x).copula.nu in (3.0, 4.0, 5.0)


def test_fit_independent():
    fit = fit_elliptical("gaussian", np.random.default_rng(23).random((5000, 3)))
    assert np.max(np.abs(fit.copula.corr[np.triu_indices(3, 1)])) < 0.04


def test_fit_needs_rows():
    with pytest.raises(FitError):
        fit_elliptical("gaussian", np.random.default_rng(0).random((59, 3)))


def test_serialization():
    c = EllipticalCopula("t", equicorr(3, 0.2), 5.0)
    d = EllipticalCopula.from_dict(c.to_dict())
    assert d.family == "t" and d.nu == 5.0 and np.array_equal(d.corr, c.corr)
