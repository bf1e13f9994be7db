"""Multivariate Gaussian and Student-t copulas.

Conditional sampling always conditions on the *trailing* ``k`` coordinates;
use :meth:`EllipticalCopula.permuted` to move a conditioning block there.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import numerics
from .exceptions import DomainError, FitError, NumericError
from .numerics import SpdMatrix
from .pair import EPS, NU_GRID, clamp

__all__ = [
    "EllipticalCopula",
    "EllipticalFit",
    "elliptical_density",
    "elliptical_log_density",
    "sample_elliptical",
    "conditional_sample_elliptical",
    "kendall_tau_matrix",
    "fit_elliptical",
]


class EllipticalCopula:
    """Gaussian or t copula with correlation matrix ``sigma``.

    Parameters
    ----------
    family : {"gaussian", "t"}
    sigma : array_like
        Correlation matrix (unit diagonal, positive definite).
    nu : float, optional
        Degrees of freedom, required for the t copula (``nu > 1``).
    """

    def __init__(self, family, sigma, nu=None):
        if family not in ("gaussian", "t"):
            raise DomainError(f"elliptical family must be 'gaussian' or 't', got {family!r}")
        sigma = np.array(sigma, dtype=float, ndmin=2)
        if not np.allclose(np.diag(sigma), 1.0, atol=1e-10):
            raise DomainError("sigma must have a unit diagonal")
        off = sigma[~np.eye(sigma.shape[0], dtype=bool)]
        if np.any(np.abs(off) >= 1.0):
            raise DomainError("correlations must lie strictly inside (-1, 1)")
        if family == "t" and (nu is None or not nu > 1.0):
            raise DomainError(f"t copula needs nu > 1, got {nu}")
        self.family = family
        self.sigma = SpdMatrix(sigma)
        self.nu = float(nu) if family == "t" else None
        self._conditionals = {}

    @property
    def dim(self):
        return self.sigma.dim

    @property
    def corr(self):
        return self.sigma.entries

    def permuted(self, order):
        """Copula of the variables re-indexed by ``order``."""
        order = np.asarray(order)
        return EllipticalCopula(self.family, self.corr[np.ix_(order, order)], self.nu)

    def to_dict(self):
        d = {"family": self.family, "sigma": self.corr.tolist()}
        if self.nu is not None:
            d["nu"] = self.nu
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d["sigma"], d.get("nu"))

    def _to_latent(self, u):
        u = clamp(u)
        if self.family == "gaussian":
            return special.ndtri(u)
        return numerics.student_t_quantile(u, self.nu)

    def _from_latent(self, z):
        if self.family == "gaussian":
            out = special.ndtr(z)
        else:
            out = special.stdtr(self.nu, z)
        return np.clip(out, EPS, 1.0 - EPS)

    def conditional_law(self, k):
        """Regression matrix, residual factor and conditioning block for the trailing ``k`` coordinates."""
        if k not in self._conditionals:
            d = self.dim
            if not 1 <= k < d:
                raise DomainError(f"conditioning block size must be in [1, {d - 1}], got {k}")
            s = self.corr
            s11, s12, s22 = s[: d - k, : d - k], s[: d - k, d - k:], s[d - k:, d - k:]
            try:
                s22_spd = SpdMatrix(s22)
            except ValueError as exc:
                raise NumericError(f"conditioning block is singular: {exc}") from exc
            coef = s22_spd.solve(s12.T).T
            resid = s11 - coef @ s12.T
            resid = 0.5 * (resid + resid.T)
            self._conditionals[k] = (coef, numerics.cholesky_factor(resid), s22_spd)
        return self._conditionals[k]

    def __repr__(self):
        extra = f", nu={self.nu:g}" if self.nu is not None else ""
        return f"EllipticalCopula({self.family!r}, dim={self.dim}{extra})"


def elliptical_log_density(c, u):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != c.dim:
        raise DomainError(f"expected {c.dim} coordinates, got {u.shape[1]}")
    z = c._to_latent(u)
    q = c.sigma.mahalanobis(z)
    logdet = c.sigma.logdet()
    d = c.dim
    if c.family == "gaussian":
        return -0.5 * logdet - 0.5 * (q - np.sum(z * z, axis=1))
    nu = c.nu
    const = (
        special.gammaln(0.5 * (nu + d))
        + (d - 1) * special.gammaln(0.5 * nu)
        - d * special.gammaln(0.5 * (nu + 1.0))
    )
    return (
        const
        - 0.5 * logdet
        - 0.5 * (nu + d) * np.log1p(q / nu)
        + 0.5 * (nu + 1.0) * np.sum(np.log1p(z * z / nu), axis=1)
    )


def elliptical_density(c, u):
    """Copula density at one point (1-d input) or at each row of a matrix."""
    out = np.exp(elliptical_log_density(c, u))
    return out[0] if np.ndim(u) == 1 else out


def sample_elliptical(c, n, rng):
    """Draw ``n`` pseudo-observation vectors from the copula."""
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((n, c.dim)) @ c.sigma.factor.T
    if c.family == "t":
        z *= np.sqrt(c.nu / rng.chisquare(c.nu, size=n))[:, None]
    return c._from_latent(z)


def conditional_sample_elliptical(c, cond, n, rng):
    """Sample the leading ``dim - k`` coordinates given the trailing ``k``.

    The t case uses the exact conditional multivariate t law with
    ``nu + k`` degrees of freedom; outputs are mapped back through the
    univariate ``t_nu`` distribution so the copula scale is preserved.
    """
    cond = np.asarray(cond, dtype=float).ravel()
    if not np.all((cond > 0.0) & (cond < 1.0)):
        raise DomainError("conditioning values must lie strictly inside (0, 1)")
    k = cond.size
    coef, resid_factor, s22 = c.conditional_law(k)
    rng = np.random.default_rng(rng)
    z2 = c._to_latent(cond)
    loc = coef @ z2
    eps = rng.standard_normal((n, c.dim - k)) @ resid_factor.T
    if c.family == "t":
        nu = c.nu
        q = float(s22.mahalanobis(z2)[0])
        scale = math.sqrt((nu + q) / (nu + k))
        mix = np.sqrt((nu + k) / rng.chisquare(nu + k, size=n))
        eps *= (scale * mix)[:, None]
    return c._from_latent(loc + eps)


def kendall_tau_matrix(u):
    """Pairwise Kendall's tau of the columns of ``u``."""
    from scipy.stats import kendalltau

    u = np.asarray(u, dtype=float)
    d = u.shape[1]
    tau = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            t = kendalltau(u[:, i], u[:, j]).statistic
            tau[i, j] = tau[j, i] = 0.0 if not np.isfinite(t) else t
    return tau


@dataclass(frozen=True)
class EllipticalFit:
    copula: EllipticalCopula
    loglik: float


def fit_elliptical(family, u, nu_grid=NU_GRID):
    """Estimate an elliptical copula from pseudo-observations.

    The correlation matrix comes from pairwise Kendall's tau inversion
    ``sin(pi * tau / 2)``, repaired to positive definiteness when needed.
    For the t copula ``nu`` then maximizes the profile likelihood over
    ``nu_grid`` with the correlation matrix held fixed.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise FitError("need a matrix with at least two columns")
    n, d = u.shape
    if n < 20 * d:
        raise FitError(f"need at least {20 * d} rows for dimension {d}, got {n}")
    if not np.all((u > 0) & (u < 1)):
        raise FitError("pseudo-observations must lie strictly inside (0, 1)")
    sigma = numerics.repair_correlation(np.sin(0.5 * np.pi * kendall_tau_matrix(u)))
    if family == "gaussian":
        cop = EllipticalCopula("gaussian", sigma)
        return EllipticalFit(cop, float(np.sum(elliptical_log_density(cop, u))))
    if family != "t":
        raise DomainError(f"elliptical family must be 'gaussian' or 't', got {family!r}")
    best = None
    for nu in nu_grid:
        cop = EllipticalCopula("t", sigma, nu)
        ll = float(np.sum(elliptical_log_density(cop, u)))
        if best is None or ll > best.loglik:
            best = EllipticalFit(cop, ll)
    return best
