import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stcopula import pair as pc
from stcopula.exceptions import DomainError, FitError, SelectionError
from stcopula.pair import PairCopula

FAMILY_CASES = [
    PairCopula("independence"),
    PairCopula("gaussian", rho=0.4),
    PairCopula("gaussian", rho=-0.7),
    PairCopula("t", rho=0.4, nu=4.0),
    PairCopula("t", rho=-0.3, nu=2.0),
    PairCopula("clayton", theta=2.0),
    PairCopula("clayton", theta=0.3),
    PairCopula("gumbel", theta=2.0),
    PairCopula("gumbel", theta=4.0),
]
GRID = (np.arange(20) + 0.5) / 20


def clayton_cdf(u, v, th):
    return (u ** -th + v ** -th - 1) ** (-1 / th)


def test_independence_densities():
    u = np.array([0.1, 0.5, 0.9])
    v = np.array([0.7, 0.2, 0.95])
    assert np.allclose(pc.pair_density(PairCopula("gaussian", rho=0.0), u, v), 1.0)
    assert np.allclose(pc.pair_density(PairCopula("gumbel", theta=1.0), u, v), 1.0)
    assert np.allclose(pc.pair_density(pc.INDEPENDENCE, u, v), 1.0)


def test_clayton_density_closed_form_and_cdf_derivative():
    th, u, v = 2.0, 0.5, 0.5
    expect = (1 + th) * (u * v) ** (-1 - th) * (u ** -th + v ** -th - 1) ** (-2 - 1 / th)
    c = PairCopula("clayton", theta=th)
    assert pc.pair_density(c, u, v) == pytest.approx(expect, rel=1e-12)
    e = 1e-4
    mixed = (clayton_cdf(u + e, v + e, th) - clayton_cdf(u + e, v - e, th)
             - clayton_cdf(u - e, v + e, th) + clayton_cdf(u - e, v - e, th)) / (4 * e * e)
    assert pc.pair_density(c, u, v) == pytest.approx(mixed, rel=1e-6)


@pytest.mark.parametrize("c", FAMILY_CASES, ids=str)
def test_density_is_mixed_derivative_of_cdf(c):
    u, v, e = 0.35, 0.6, 1e-4
    cdf = lambda a, b: float(pc.pair_cdf(c, a, b))
    mixed = (cdf(u + e, v + e) - cdf(u + e, v - e) - cdf(u - e, v + e) + cdf(u - e, v - e)) / (4 * e * e)
    assert float(pc.pair_density(c, u, v)) == pytest.approx(mixed, rel=2e-4)


@pytest.mark.parametrize("c", FAMILY_CASES, ids=str)
def test_h_is_cdf_derivative(c):
    u, v, e = 0.3, 0.7, 1e-6
    fd = (pc.pair_cdf(c, u, v + e) - pc.pair_cdf(c, u, v - e)) / (2 * e)
    assert float(pc.h_function(c, u, v)) == pytest.approx(float(fd), abs=1e-5)


def test_h_special_cases():
    u = np.array([0.2, 0.6])
    assert np.allclose(pc.h_function(pc.INDEPENDENCE, u, [0.9, 0.1]), u)
    assert np.allclose(pc.h_function(PairCopula("gaussian", rho=0.0), u, [0.9, 0.1]), u)
    rho, v = 0.4, 0.7
    expect = stats.norm.cdf((stats.norm.ppf(0.2) - rho * stats.norm.ppf(v)) / np.sqrt(1 - rho ** 2))
    assert pc.h_function(PairCopula("gaussian", rho=rho), 0.2, v) == pytest.approx(expect, abs=1e-14)


@pytest.mark.parametrize("c", FAMILY_CASES, ids=str)
def test_h_inverse_roundtrip_grid(c):
    uu, vv = np.meshgrid(GRID, GRID)
    uu, vv = uu.ravel(), vv.ravel()
    back = pc.h_inverse(c, pc.h_function(c, uu, vv), vv)
    assert np.max(np.abs(back - uu)) <= 1e-8


def test_h_inverse_independence_identity():
    p = np.array([0.1, 0.5, 0.77])
    assert np.array_equal(pc.h_inverse(pc.INDEPENDENCE, p, [0.3, 0.3, 0.3]), p)


@pytest.mark.parametrize("c", [PairCopula("gaussian", rho=0.4), PairCopula("t", rho=0.4, nu=4.0),
                               PairCopula("clayton", theta=2.0)], ids=str)
def test_closed_form_h_inverse_matches_root_finder(c):
    pp, vv = np.meshgrid(GRID, GRID)
    closed = pc.h_inverse(c, pp.ravel(), vv.ravel())
    generic = pc.h_inverse_numeric(c, pp.ravel(), vv.ravel())
    assert np.max(np.abs(closed - generic)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999), st.floats(1.0, 8.0))
def test_gumbel_h_inverse_property(u, v, theta):
    c = PairCopula("gumbel", theta=theta)
    p = pc.h_function(c, u, v)
    assert 0.0 <= p <= 1.0
    # h(h^-1(p)) = p is well conditioned everywhere
    assert abs(pc.h_function(c, pc.h_inverse(c, p, v), v) - p) < 1e-9
    # u itself is only identifiable where h is not flat at 0 or 1
    if 1e-6 < p < 1 - 1e-6:
        assert abs(pc.h_inverse(c, p, v) - u) < 1e-7


@pytest.mark.parametrize("c,target", [
    (pc.INDEPENDENCE, 0.0),
    (PairCopula("gaussian", rho=0.4), 2 / np.pi * np.arcsin(0.4)),
    (PairCopula("clayton", theta=2.0), 0.5),
    (PairCopula("gumbel", theta=2.0), 0.5),
    (PairCopula("t", rho=0.4, nu=3.0), 2 / np.pi * np.arcsin(0.4)),
], ids=str)
def test_sample_pair_tau(c, target):
    x = pc.sample_pair(c, 10_000, np.random.default_rng(1))
    assert x.shape == (10_000, 2)
    assert np.all((x > 0) & (x < 1))
    tol = 0.03 if c.family == "independence" else 0.02
    assert abs(stats.kendalltau(x[:, 0], x[:, 1]).statistic - target) <= tol


def test_sample_pair_brute_force_concordance():
    x = pc.sample_pair(PairCopula("gaussian", rho=0.4), 1500, np.random.default_rng(3))
    d0 = np.sign(x[:, 0][:, None] - x[:, 0][None, :])
    d1 = np.sign(x[:, 1][:, None] - x[:, 1][None, :])
    n = x.shape[0]
    tau = (d0 * d1).sum() / (n * (n - 1))
    assert tau == pytest.approx(stats.kendalltau(x[:, 0], x[:, 1]).statistic, abs=1e-12)


def test_kendall_tau_invert():
    assert pc.kendall_tau_invert("gaussian", 0.0).rho == 0.0
    assert pc.kendall_tau_invert("gumbel", 0.0).theta == 1.0
    assert pc.kendall_tau_invert("clayton", 0.5).theta == pytest.approx(2.0)
    assert pc.kendall_tau_invert("gumbel", 0.5).theta == pytest.approx(2.0)
    with pytest.raises(DomainError, match="clayton"):
        pc.kendall_tau_invert("clayton", -0.2)
    with pytest.raises(DomainError, match="gumbel"):
        pc.kendall_tau_invert("gumbel", -0.2)


@pytest.mark.parametrize("kwargs", [dict(family="gaussian", rho=1.0), dict(family="t", rho=0.3, nu=0.5),
                                    dict(family="clayton", theta=0.0), dict(family="gumbel", theta=0.5),
                                    dict(family="frank", theta=2.0)])
def test_invalid_parameters(kwargs):
    with pytest.raises(DomainError):
        PairCopula(**kwargs)


def test_serialization_roundtrip():
    for c in FAMILY_CASES:
        assert PairCopula.from_dict(c.to_dict()) == c


def test_mle_recovery_gaussian_and_clayton():
    x = pc.sample_pair(PairCopula("gaussian", rho=0.4), 5000, np.random.default_rng(11))
    fit = pc.fit_pair_mle("gaussian", x[:, 0], x[:, 1])
    assert 0.37 <= fit.copula.rho <= 0.43
    x = pc.sample_pair(PairCopula("clayton", theta=2.0), 5000, np.random.default_rng(12))
    fit = pc.fit_pair_mle("clayton", x[:, 0], x[:, 1])
    assert 1.8 <= fit.copula.theta <= 2.2


def test_mle_independent_data():
    x = np.random.default_rng(13).random((5000, 2))
    fit = pc.fit_pair_mle("gaussian", x[:, 0], x[:, 1])
    assert abs(fit.copula.rho) <= 0.03


def test_mle_loglik_matches_density_sum():
    x = pc.sample_pair(PairCopula("gumbel", theta=1.7), 800, np.random.default_rng(14))
    fit = pc.fit_pair_mle("gumbel", x[:, 0], x[:, 1])
    assert fit.loglik == pytest.approx(np.sum(pc.log_density(fit.copula, x[:, 0], x[:, 1])), rel=1e-10)
    assert fit.aic == pytest.approx(2 - 2 * fit.loglik)


def test_mle_preconditions():
    with pytest.raises(FitError):
        pc.fit_pair_mle("gaussian", [0.5] * 10, [0.5] * 10)
    with pytest.raises(FitError):
        pc.fit_pair_mle("gaussian", [0.0] + [0.5] * 40, [0.5] * 41)


def test_selection():
    rng = np.random.default_rng(15)
    x = pc.sample_pair(PairCopula("clayton", theta=3.0), 5000, rng)
    assert pc.select_pair_family(x[:, 0], x[:, 1]).copula.family == "clayton"
    x = pc.sample_pair(PairCopula("gaussian", rho=0.8), 5000, rng)
    assert pc.select_pair_family(x[:, 0], x[:, 1]).copula.family in ("gaussian", "t")
    x = rng.random((5000, 2))
    assert pc.select_pair_family(x[:, 0], x[:, 1]).copula.family == "independence"


def test_selection_skips_archimedean_for_negative_tau():
    x = pc.sample_pair(PairCopula("gaussian", rho=-0.5), 2000, np.random.default_rng(16))
    fam = pc.select_pair_family(x[:, 0], x[:, 1], ("clayton", "gumbel", "gaussian")).copula.family
    assert fam == "gaussian"
    with pytest.raises(SelectionError):
        pc.select_pair_family(x[:, 0], x[:, 1], ("clayton", "gumbel"))
    with pytest.raises(SelectionError):
        pc.select_pair_family(x[:, 0], x[:, 1], ())
