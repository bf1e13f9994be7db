"""Bivariate copula families: densities, h-functions, sampling and estimation.

Families are the Gaussian, Student-t, Clayton and Gumbel copulas plus the
independence copula.  All of them are exchangeable, so the h-function
conditioning on the first argument is the same function with the arguments
swapped.

Convention: ``h(u | v) = dC(u, v) / dv``.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from . import numerics
from .exceptions import DomainError, FitError, NumericError, SelectionError

FAMILIES = ("independence", "gaussian", "t", "clayton", "gumbel")
ALL_CANDIDATES = ("independence", "gaussian", "t", "clayton", "gumbel")
NU_GRID = (2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0)

EPS = 1e-10
RHO_MAX = 0.999
CLAYTON_MIN, CLAYTON_MAX = 1e-4, 50.0
GUMBEL_MAX = 50.0
MIN_PAIRS = 30


def clamp(u):
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


@dataclass(frozen=True)
class PairCopula:
    """One bivariate copula: a family tag and its parameters."""

    family: str
    rho: float | None = None
    nu: float | None = None
    theta: float | None = None

    def __post_init__(self):
        f = self.family
        if f not in FAMILIES:
            raise DomainError(f"unknown copula family {f!r}")
        if f in ("gaussian", "t"):
            if self.rho is None or not -1.0 < self.rho < 1.0:
                raise DomainError(f"{f} copula needs rho in (-1, 1), got {self.rho}")
        if f == "t" and (self.nu is None or not self.nu > 1.0):
            raise DomainError(f"t copula needs nu > 1, got {self.nu}")
        if f == "clayton" and (self.theta is None or not self.theta > 0.0):
            raise DomainError(f"clayton copula needs theta > 0, got {self.theta}")
        if f == "gumbel" and (self.theta is None or not self.theta >= 1.0):
            raise DomainError(f"gumbel copula needs theta >= 1, got {self.theta}")

    @property
    def n_params(self):
        return {"independence": 0, "gaussian": 1, "t": 2, "clayton": 1, "gumbel": 1}[self.family]

    @property
    def tau(self):
        """Theoretical Kendall's tau."""
        if self.family in ("gaussian", "t"):
            return 2.0 / math.pi * math.asin(self.rho)
        if self.family == "clayton":
            return self.theta / (self.theta + 2.0)
        if self.family == "gumbel":
            return 1.0 - 1.0 / self.theta
        return 0.0

    def to_dict(self):
        d = {"family": self.family}
        for k in ("rho", "nu", "theta"):
            if getattr(self, k) is not None:
                d[k] = float(getattr(self, k))
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d.get("rho"), d.get("nu"), d.get("theta"))

    # convenience wrappers
    def pdf(self, u, v):
        return pair_density(self, u, v)

    def h(self, u, v):
        return h_function(self, u, v)

    def hinv(self, p, v):
        return h_inverse(self, p, v)

    def __str__(self):
        params = ", ".join(f"{k}={v:.4g}" for k, v in self.to_dict().items() if k != "family")
        return f"{self.family}({params})"


INDEPENDENCE = PairCopula("independence")


def _t_const(nu):
    return (
        special.gammaln(0.5 * (nu + 2.0))
        + special.gammaln(0.5 * nu)
        - 2.0 * special.gammaln(0.5 * (nu + 1.0))
    )


def _gaussian_logpdf_z(rho, x, y):
    r2 = rho * rho
    return -0.5 * np.log1p(-r2) - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * (1.0 - r2))


def _t_logpdf_z(rho, nu, x, y):
    r2 = 1.0 - rho * rho
    q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2)
    return (
        _t_const(nu)
        - 0.5 * np.log(r2)
        - 0.5 * (nu + 2.0) * np.log1p(q)
        + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
    )


def _clayton_logpdf(theta, u, v):
    lu, lv = np.log(u), np.log(v)
    s = np.expm1(-theta * lu) + np.expm1(-theta * lv) + 1.0  # u^-t + v^-t - 1
    return np.log1p(theta) - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * np.log(s)


def _gumbel_logpdf(theta, u, v):
    a, b = -np.log(u), -np.log(v)
    la, lb = np.log(a), np.log(b)
    s = np.exp(theta * la) + np.exp(theta * lb)
    s1t = s ** (1.0 / theta)
    return (
        -s1t
        + a + b  # -log(u) - log(v)
        + (theta - 1.0) * (la + lb)
        + (1.0 / theta - 2.0) * np.log(s)
        + np.log(s1t + theta - 1.0)
    )


def log_density(c, u, v):
    """Log of :func:`pair_density`."""
    u, v = np.broadcast_arrays(clamp(u), clamp(v))
    f = c.family
    if f == "independence":
        return np.zeros(u.shape)
    if f == "gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        return _gaussian_logpdf_z(c.rho, x, y)
    if f == "t":
        x = numerics.student_t_quantile(u, c.nu)
        y = numerics.student_t_quantile(v, c.nu)
        return _t_logpdf_z(c.rho, c.nu, x, y)
    if f == "clayton":
        return _clayton_logpdf(c.theta, u, v)
    return _gumbel_logpdf(c.theta, u, v)


def pair_density(c, u, v):
    """Copula density ``c(u, v)``; arguments are clamped to ``[1e-10, 1 - 1e-10]``."""
    return np.exp(log_density(c, u, v))


def pair_cdf(c, u, v):
    """Copula distribution function ``C(u, v)``.

    Closed form except for the t copula, which integrates its h-function
    numerically (scalar arguments only in that case).
    """
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    f = c.family
    if f == "independence":
        return u * v
    if f == "clayton":
        t = c.theta
        return np.maximum(u ** -t + v ** -t - 1.0, 0.0) ** (-1.0 / t)
    if f == "gumbel":
        a, b = -np.log(u), -np.log(v)
        return np.exp(-((a ** c.theta + b ** c.theta) ** (1.0 / c.theta)))
    if f == "gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        cov = [[1.0, c.rho], [c.rho, 1.0]]
        pts = np.stack([x.ravel(), y.ravel()], axis=1)
        return stats.multivariate_normal(mean=[0.0, 0.0], cov=cov).cdf(pts).reshape(u.shape)
    out = np.empty(u.shape)
    for idx in np.ndindex(u.shape):
        out[idx] = integrate.quad(lambda s: float(h_function(c, u[idx], s)), 0.0, v[idx],
                                  epsabs=1e-13, epsrel=1e-12)[0]
    return out


def h_function(c, u, v):
    """Conditional distribution ``h(u | v) = dC(u, v)/dv``."""
    u, v = np.broadcast_arrays(clamp(u), clamp(v))
    f = c.family
    if f == "independence":
        return u.copy()
    if f == "gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        out = special.ndtr((x - c.rho * y) / math.sqrt(1.0 - c.rho ** 2))
    elif f == "t":
        nu = c.nu
        x = numerics.student_t_quantile(u, nu)
        y = numerics.student_t_quantile(v, nu)
        scale = np.sqrt((nu + y * y) * (1.0 - c.rho ** 2) / (nu + 1.0))
        out = special.stdtr(nu + 1.0, (x - c.rho * y) / scale)
    elif f == "clayton":
        t = c.theta
        lu, lv = np.log(u), np.log(v)
        s = np.expm1(-t * lu) + np.expm1(-t * lv) + 1.0
        out = np.exp(-(t + 1.0) * lv - (1.0 + 1.0 / t) * np.log(s))
    else:
        t = c.theta
        a, b = -np.log(u), -np.log(v)
        s = a ** t + b ** t
        out = np.exp(-(s ** (1.0 / t)) + b + (t - 1.0) * np.log(b) + (1.0 / t - 1.0) * np.log(s))
    return np.clip(out, 0.0, 1.0)


def h_inverse_numeric(c, p, v, tol=1e-15, maxiter=200):
    """Invert ``h(. | v)`` at level ``p`` by safeguarded Newton iteration.

    Works for every family; bisection takes over whenever a Newton step
    leaves the current bracket.
    """
    p, v = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(v, dtype=float))
    p = p.astype(float).ravel()
    v = v.astype(float).ravel()
    lo = np.zeros_like(p)
    hi = np.ones_like(p)
    u = np.clip(p, EPS, 1.0 - EPS)
    active = np.ones(p.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ui, vi, pi = u[idx], v[idx], p[idx]
        f = h_function(c, ui, vi) - pi
        below = f < 0
        lo[idx] = np.where(below, ui, lo[idx])
        hi[idx] = np.where(below, hi[idx], ui)
        dens = pair_density(c, ui, vi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = ui - f / dens
        bad = ~np.isfinite(step) | (step <= lo[idx]) | (step >= hi[idx])
        new = np.where(bad, 0.5 * (lo[idx] + hi[idx]), step)
        done = (f == 0.0) | (hi[idx] - lo[idx] < tol) | (np.abs(new - ui) < 1e-17)
        u[idx] = np.where(done, ui, new)
        active[idx[done]] = False
    if np.any(active):
        raise NumericError(f"h-inverse did not converge for {int(active.sum())} points")
    return np.clip(u, EPS, 1.0 - EPS)


def h_inverse(c, p, v):
    """Inverse of :func:`h_function` in its first argument."""
    shape = np.broadcast(np.asarray(p), np.asarray(v)).shape
    p, v = np.broadcast_arrays(np.clip(np.asarray(p, dtype=float), EPS, 1.0 - EPS), clamp(v))
    f = c.family
    if f == "independence":
        out = p.copy()
    elif f == "gaussian":
        out = special.ndtr(math.sqrt(1.0 - c.rho ** 2) * special.ndtri(p) + c.rho * special.ndtri(v))
    elif f == "t":
        nu = c.nu
        y = numerics.student_t_quantile(v, nu)
        scale = np.sqrt((nu + y * y) * (1.0 - c.rho ** 2) / (nu + 1.0))
        out = special.stdtr(nu, numerics.student_t_quantile(p, nu + 1.0) * scale + c.rho * y)
    elif f == "clayton":
        t = c.theta
        lv, lp = np.log(v), np.log(p)
        # u^-t = (p v^(t+1))^(-t/(t+1)) + 1 - v^-t
        s = np.exp(-t / (t + 1.0) * (lp + (t + 1.0) * lv)) - np.expm1(-t * lv)
        out = np.exp(-np.log(s) / t)
    else:
        out = h_inverse_numeric(c, p, v).reshape(p.shape)
    return np.clip(out, EPS, 1.0 - EPS).reshape(shape)


def sample_pair(c, n, rng):
    """Draw ``n`` pairs ``(u, v)`` by inverting the h-function."""
    rng = np.random.default_rng(rng)
    w = rng.random((n, 2))
    v = w[:, 1]
    u = h_inverse(c, w[:, 0], v)
    return np.column_stack([u, v])


def kendall_tau_invert(family, tau):
    """Starting parameters from Kendall's tau."""
    if not -1.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (-1, 1), got {tau}")
    if family in ("gaussian", "t"):
        rho = float(np.clip(math.sin(math.pi * tau / 2.0), -RHO_MAX, RHO_MAX))
        return PairCopula(family, rho=rho, nu=10.0 if family == "t" else None)
    if family == "clayton":
        if tau < 0:
            raise DomainError(f"clayton copula cannot attain negative tau {tau}")
        return PairCopula("clayton", theta=float(np.clip(2.0 * tau / (1.0 - tau), CLAYTON_MIN, CLAYTON_MAX)))
    if family == "gumbel":
        if tau < 0:
            raise DomainError(f"gumbel copula cannot attain negative tau {tau}")
        return PairCopula("gumbel", theta=float(min(1.0 / (1.0 - tau), GUMBEL_MAX)))
    if family == "independence":
        return INDEPENDENCE
    raise DomainError(f"unknown copula family {family!r}")


@dataclass(frozen=True)
class PairFit:
    copula: PairCopula
    loglik: float
    converged: bool = True

    @property
    def aic(self):
        return 2.0 * self.copula.n_params - 2.0 * self.loglik


def empirical_tau(u, v):
    tau = stats.kendalltau(u, v).statistic
    return 0.0 if not np.isfinite(tau) else float(tau)


def _check_pairs(u, v):
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise FitError("u and v must have the same length")
    if u.size < MIN_PAIRS:
        raise FitError(f"need at least {MIN_PAIRS} pairs, got {u.size}")
    if not (np.all((u > 0) & (u < 1)) and np.all((v > 0) & (v < 1))):
        raise FitError("pseudo-observations must lie strictly inside (0, 1)")
    return clamp(u), clamp(v)


def _brent(negll, lo, hi):
    res = optimize.minimize_scalar(negll, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-7, "maxiter": 200})
    return float(res.x), -float(res.fun)


def fit_pair_mle(family, u, v, tau=None):
    """Maximum likelihood fit of one family to pseudo-observation pairs.

    Returns a :class:`PairFit`.  If the optimizer fails to beat the
    tau-inversion starting value, the start is returned with
    ``converged=False`` and a warning.
    """
    u, v = _check_pairs(u, v)
    if family == "independence":
        return PairFit(INDEPENDENCE, 0.0)
    if tau is None:
        tau = empirical_tau(u, v)
    tau = float(np.clip(tau, -0.99, 0.99))
    start = kendall_tau_invert(family, tau)

    if family == "gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        rho, ll = _brent(lambda r: -np.sum(_gaussian_logpdf_z(r, x, y)), -RHO_MAX, RHO_MAX)
        best = PairCopula("gaussian", rho=rho)
    elif family == "t":
        # profile likelihood: the quantile transform depends on nu only
        ll, best = -np.inf, None
        start_ll = -np.inf
        for nu in NU_GRID:
            x = numerics.student_t_quantile(u, nu)
            y = numerics.student_t_quantile(v, nu)
            rho, ll_nu = _brent(lambda r: -np.sum(_t_logpdf_z(r, nu, x, y)), -RHO_MAX, RHO_MAX)
            if ll_nu > ll:
                ll, best = ll_nu, PairCopula("t", rho=rho, nu=nu)
            start_ll = max(start_ll, float(np.sum(_t_logpdf_z(start.rho, nu, x, y))))
        if ll < start_ll - 1e-9:
            warnings.warn("t copula MLE did not improve on the tau-inversion start")
            return PairFit(start, start_ll, converged=False)
        return PairFit(best, ll)
    elif family == "clayton":
        theta, ll = _brent(lambda t: -np.sum(_clayton_logpdf(t, u, v)), CLAYTON_MIN, CLAYTON_MAX)
        best = PairCopula("clayton", theta=theta)
    elif family == "gumbel":
        theta, ll = _brent(lambda t: -np.sum(_gumbel_logpdf(t, u, v)), 1.0, GUMBEL_MAX)
        best = PairCopula("gumbel", theta=theta)
    else:
        raise DomainError(f"unknown copula family {family!r}")

    start_ll = float(np.sum(log_density(start, u, v)))
    if not np.isfinite(ll) or ll < start_ll - 1e-9:
        warnings.warn(f"{family} MLE did not improve on the tau-inversion start")
        return PairFit(start, start_ll, converged=False)
    return PairFit(best, ll)


def select_pair_family(u, v, candidates=ALL_CANDIDATES):
    """Fit every candidate family and return the AIC-minimizing :class:`PairFit`.

    Clayton and Gumbel are dropped when the sample tau is negative since
    neither can represent negative dependence.
    """
    candidates = tuple(candidates)
    if not candidates:
        raise SelectionError("candidate family set is empty")
    u, v = _check_pairs(u, v)
    tau = empirical_tau(u, v)
    fits = []
    for fam in candidates:
        if fam in ("clayton", "gumbel") and tau < 0:
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fits.append(fit_pair_mle(fam, u, v, tau=tau))
        except (FitError, DomainError, NumericError):
            continue
    if not fits:
        raise SelectionError(f"no candidate in {candidates} could be fitted")
    return min(fits, key=lambda f: f.aic)
