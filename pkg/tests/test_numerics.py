import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from stcopula import numerics as nm
from stcopula.exceptions import DomainError, FactorizationError


def test_normal_cdf_symmetry_and_oracle():
    assert nm.std_normal_cdf(0.0) == 0.5
    # oracle: adaptive integration of the density
    val, _ = integrate.quad(lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi), -np.inf, 1.959964)
    assert abs(nm.std_normal_cdf(1.959964) - val) < 1e-9
    assert abs(nm.std_normal_cdf(1.959964) - 0.975) < 1e-6
    for x in (0.5, 1.0, 3.0):
        assert nm.std_normal_cdf(-x) == pytest.approx(1 - nm.std_normal_cdf(x), abs=1e-15)


def test_normal_quantile():
    assert nm.std_normal_quantile(0.5) == 0.0
    assert abs(nm.std_normal_quantile(0.975) - 1.959964) < 1e-5
    x = np.linspace(-5, 5, 201)
    assert np.max(np.abs(nm.std_normal_quantile(nm.std_normal_cdf(x)) - x)) < 1e-8


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_normal_quantile_domain(p):
    with pytest.raises(DomainError):
        nm.std_normal_quantile(p)


def test_normal_cdf_rejects_nonfinite():
    with pytest.raises(DomainError):
        nm.std_normal_cdf(np.inf)


def test_student_t_cdf():
    for nu in (0.5, 1.0, 4.0, 30.0):
        assert nm.student_t_cdf(0.0, nu) == 0.5
    assert abs(nm.student_t_cdf(1.0, 1.0) - 0.75) < 1e-9
    assert abs(nm.student_t_cdf(1.959964, 1e6) - nm.std_normal_cdf(1.959964)) < 1e-4
    with pytest.raises(DomainError):
        nm.student_t_cdf(0.3, 0.0)


def test_student_t_cdf_matches_density_integral():
    nu, x = 3.5, 1.3
    val, _ = integrate.quad(lambda t: np.exp(nm.student_t_logpdf(t, nu)), -np.inf, x)
    assert abs(nm.student_t_cdf(x, nu) - val) < 1e-9


def test_student_t_quantile():
    assert nm.student_t_quantile(0.5, 3.0) == 0.0
    assert abs(nm.student_t_quantile(0.75, 1.0) - 1.0) < 1e-7
    ps = np.array([1e-9, 1e-4, 0.01, 0.2, 0.49, 0.51, 0.8, 0.99, 1 - 1e-6])
    for nu in (0.7, 1.0, 2.0, 2.5, 4.0, 10.0, 100.0, 1e5):
        q = nm.student_t_quantile(ps, nu)
        assert np.max(np.abs(nm.student_t_cdf(q, nu) - ps)) < 1e-7
        assert np.all(np.diff(q) > 0)


@pytest.mark.parametrize("p,nu", [(0.0, 3.0), (1.0, 3.0), (0.5, -1.0), (0.5, 0.0)])
def test_student_t_quantile_domain(p, nu):
    with pytest.raises(DomainError):
        nm.student_t_quantile(p, nu)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.5, 200.0))
def test_student_t_roundtrip_property(p, nu):
    assert abs(nm.student_t_cdf(nm.student_t_quantile(p, nu), nu) - p) < 1e-7


def test_cholesky_known_values():
    assert np.array_equal(nm.cholesky_factor(np.eye(3)), np.eye(3))
    L = nm.cholesky_factor([[1.0, 0.4], [0.4, 1.0]])
    assert np.max(np.abs(L - [[1.0, 0.0], [0.4, np.sqrt(0.84)]])) < 1e-12
    assert np.allclose(L @ L.T, [[1.0, 0.4], [0.4, 1.0]], atol=1e-15)


def test_cholesky_failure_names_pivot():
    with pytest.raises(FactorizationError) as exc:
        nm.cholesky_factor([[1.0, 1.1], [1.1, 1.0]])
    assert exc.value.pivot == 1


def test_cholesky_rejects_asymmetric():
    with pytest.raises(DomainError):
        nm.cholesky_factor([[1.0, 0.2], [0.3, 1.0]])


def test_spd_matrix_helpers(rng):
    a = rng.normal(size=(4, 4))
    m = a @ a.T + 4 * np.eye(4)
    s = nm.SpdMatrix(m)
    assert s.dim == 4
    assert s.logdet() == pytest.approx(np.linalg.slogdet(m)[1], rel=1e-12)
    b = rng.normal(size=4)
    assert np.allclose(s.solve(b), np.linalg.solve(m, b))
    z = rng.normal(size=(5, 4))
    expect = np.einsum("ij,jk,ik->i", z, np.linalg.inv(m), z)
    assert np.allclose(s.mahalanobis(z), expect)


def test_repair_correlation():
    bad = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    fixed = nm.repair_correlation(bad)
    assert np.allclose(np.diag(fixed), 1.0)
    assert np.min(np.linalg.eigvalsh(fixed)) > 0
    nm.cholesky_factor(fixed)
    good = np.array([[1.0, 0.3], [0.3, 1.0]])
    assert np.allclose(nm.repair_correlation(good), good)
