"""Special functions and small dense linear algebra used by the copula families.

The normal and Student-t distribution functions are thin, domain-checked
wrappers over :mod:`scipy.special`.  All functions are vectorized and accept
scalars or arrays.
"""
import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from .exceptions import DomainError, FactorizationError

__all__ = [
    "std_normal_cdf",
    "std_normal_quantile",
    "std_normal_logpdf",
    "student_t_cdf",
    "student_t_quantile",
    "student_t_logpdf",
    "cholesky_factor",
    "SpdMatrix",
    "repair_correlation",
]


def _finite(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    return x


def _open_unit(p, name="p"):
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return p


def _positive_df(nu):
    nu = np.asarray(nu, dtype=float)
    if not np.all(nu > 0) or not np.all(np.isfinite(nu) | np.isposinf(nu)):
        raise DomainError(f"degrees of freedom must be positive, got {nu}")
    return nu


def std_normal_cdf(x):
    """Standard normal distribution function."""
    return special.ndtr(_finite(x))


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    return special.ndtri(_open_unit(p))


def std_normal_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - 0.5 * np.log(2.0 * np.pi)


def student_t_cdf(x, nu):
    """Student-t distribution function with ``nu`` degrees of freedom.

    Evaluated through the regularized incomplete beta function, so ``nu``
    need not be an integer.
    """
    nu = _positive_df(nu)
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("x must not be NaN")
    return special.stdtr(nu, x)


def student_t_quantile(p, nu):
    """Inverse of :func:`student_t_cdf`.

    Uses the inverse incomplete beta function on whichever tail keeps the
    argument well conditioned, followed by one Newton correction.  This is
    several times faster than ``scipy.special.stdtrit`` which matters inside
    vine sampling loops.
    """
    p = _open_unit(p)
    nu = _positive_df(nu)
    p, nu = np.broadcast_arrays(p, nu)
    q = np.minimum(p, 1.0 - p)
    two_q = 2.0 * q
    x2 = np.empty_like(q)
    # far tail: z = I^{-1}(nu/2, 1/2; 2q), x^2 = nu (1 - z) / z
    tail = two_q < 0.5
    if np.any(tail):
        z = special.betaincinv(0.5 * nu[tail], 0.5, two_q[tail])
        x2[tail] = nu[tail] * (1.0 - z) / z
    body = ~tail
    if np.any(body):
        # near the centre: w = I^{-1}(1/2, nu/2; 1 - 2q), x^2 = nu w / (1 - w)
        w = special.betaincinv(0.5, 0.5 * nu[body], (0.5 - q[body]) * 2.0)
        x2[body] = nu[body] * w / (1.0 - w)
    x = np.sqrt(x2)
    x = np.where(p < 0.5, -x, x)
    # one Newton step on the cdf
    fx = special.stdtr(nu, x)
    dens = np.exp(student_t_logpdf(x, nu))
    ok = dens > 1e-300
    x = np.where(ok, x - (fx - p) / np.where(ok, dens, 1.0), x)
    x = np.where(p == 0.5, 0.0, x)
    return x if x.ndim else float(x)


def student_t_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return (
        special.gammaln(0.5 * (nu + 1.0))
        - special.gammaln(0.5 * nu)
        - 0.5 * np.log(nu * np.pi)
        - 0.5 * (nu + 1.0) * np.log1p(x * x / nu)
    )


def cholesky_factor(m):
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises
    ------
    FactorizationError
        If a pivot is not strictly positive; the exception records the
        zero-based pivot index.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("cholesky_factor needs a square matrix")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0):
        raise DomainError("cholesky_factor needs a symmetric matrix")
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            raise FactorizationError(j, s)
        L[j, j] = np.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


class SpdMatrix:
    """Symmetric positive definite matrix with its Cholesky factor cached."""

    def __init__(self, entries):
        entries = np.array(entries, dtype=float)
        self.factor = cholesky_factor(entries)
        self.entries = entries
        self.entries.setflags(write=False)
        self.factor.setflags(write=False)

    @property
    def dim(self):
        return self.entries.shape[0]

    def logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self.factor)))

    def solve(self, b):
        """Solve ``entries @ x = b`` through two triangular solves."""
        y = solve_triangular(self.factor, b, lower=True)
        return solve_triangular(self.factor.T, y, lower=False)

    def mahalanobis(self, z):
        """Row-wise quadratic forms ``z_i^T entries^{-1} z_i`` for ``z`` of shape (n, dim)."""
        y = solve_triangular(self.factor, np.atleast_2d(z).T, lower=True)
        return np.sum(y * y, axis=0)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def repair_correlation(r, floor=1e-6):
    """Clip eigenvalues at ``floor`` and rescale to unit diagonal.

    Pairwise Kendall-tau inversion can produce indefinite matrices; this is
    the minimal repair that keeps the result a valid correlation matrix.
    Matrices that already factor are returned unchanged (symmetrized).
    """
    r = np.array(r, dtype=float)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    w, v = np.linalg.eigh(r)
    if w.min() > floor:
        return r
    w = np.maximum(w, floor)
    r = (v * w) @ v.T
    d = np.sqrt(np.diag(r))
    r = r / np.outer(d, d)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return r
