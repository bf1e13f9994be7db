"""AR(1)-X mean with absolute-value threshold GARCH(1,1) volatility.

Benchmark model, simplified::

    y_t     = mu + phi * y_{t-1} + beta_x' X_t + eps_t
    eps_t   = sigma_t * z_t,            z_t ~ t(nu)
    sigma_t = omega + alpha * (|eps_{t-1}| - gamma * eps_{t-1}) + beta * sigma_{t-1}

``sigma_t`` is the scale of the innovation (not its variance).  Positive
``gamma`` makes negative shocks raise volatility more than positive ones.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special

from .exceptions import DomainError, FitError
from .models import ProbForecast

MIN_OBS = 250
STATIONARITY_CAP = 0.999


@dataclass(frozen=True)
class ArxAvtGarchModel:
    mu: float
    phi: float
    beta_x: tuple
    omega: float
    alpha: float
    gamma: float
    beta: float
    nu: float
    sigma0: float = 1.0
    loglik: float = float("nan")
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise DomainError("alpha and beta must be nonnegative")
        if not -1.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (-1, 1), got {self.gamma}")
        if not self.nu > 2.0:
            raise DomainError(f"innovation degrees of freedom must exceed 2, got {self.nu}")
        if self.persistence >= 1.0:
            raise DomainError(f"volatility recursion is not stationary (persistence {self.persistence:.4f})")

    @property
    def persistence(self):
        return self.alpha * (1.0 + abs(self.gamma)) + self.beta

    @property
    def n_exog(self):
        return len(self.beta_x)

    def params(self):
        return np.array([self.mu, self.phi, *self.beta_x, self.omega, self.alpha, self.gamma, self.beta, self.nu])

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("mu", "phi", "omega", "alpha", "gamma", "beta", "nu", "sigma0", "loglik")}
        d["beta_x"] = list(self.beta_x)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["beta_x"] = tuple(d["beta_x"])
        return cls(**d)


def _unpack(theta, p):
    mu, phi = theta[0], theta[1]
    bx = theta[2:2 + p]
    omega, alpha, gamma, beta, nu = theta[2 + p:]
    return mu, phi, bx, omega, alpha, gamma, beta, nu


def _residuals(y, X, mu, phi, bx):
    eps = y[1:] - mu - phi * y[:-1]
    if X.shape[1]:
        eps = eps - X[1:] @ bx
    return eps


def _sigma_path(eps, omega, alpha, gamma, beta, sigma0):
    """Scale path aligned with ``eps``: ``out[t]`` is the scale of ``eps[t]``."""
    drive = omega + alpha * (np.abs(eps[:-1]) - gamma * eps[:-1])
    rest, _ = signal.lfilter([1.0], [1.0, -beta], drive, zi=[beta * sigma0])
    return np.concatenate([[sigma0], rest])


def _t_logpdf(z, nu):
    return (
        special.gammaln(0.5 * (nu + 1.0))
        - special.gammaln(0.5 * nu)
        - 0.5 * np.log(nu * np.pi)
        - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)
    )


def _loglik(theta, y, X, sigma0=None):
    p = X.shape[1]
    mu, phi, bx, omega, alpha, gamma, beta, nu = _unpack(theta, p)
    eps = _residuals(y, X, mu, phi, bx)
    s0 = np.mean(np.abs(eps)) if sigma0 is None else sigma0
    sig = _sigma_path(eps, omega, alpha, gamma, beta, s0)
    if np.any(sig <= 0) or not np.all(np.isfinite(sig)):
        return -np.inf
    return float(np.sum(_t_logpdf(eps / sig, nu) - np.log(sig)))


def _check_inputs(y, X):
    y = np.asarray(y, dtype=float).ravel()
    X = np.zeros((y.size, 0)) if X is None else np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise FitError("exogenous matrix must be row-aligned with y")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise FitError("inputs must be finite")
    return y, X


def _abs_t_mean(nu):
    # E|z| for z ~ t(nu)
    return 2.0 * np.sqrt(nu / np.pi) * np.exp(special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu)) / (nu - 1.0)


def fit_arx_avtgarch(y, X=None, starts=5, seed=0, warm_start=None):
    """Quasi maximum likelihood fit with Student-t innovations.

    Multi-start L-BFGS-B inside the stationarity region; a quadratic
    penalty keeps ``alpha (1 + |gamma|) + beta`` below one.  ``warm_start``
    (a previous fit) replaces one of the perturbed starts.
    """
    y, X = _check_inputs(y, X)
    if y.size < MIN_OBS:
        raise FitError(f"need at least {MIN_OBS} observations, got {y.size}")
    p = X.shape[1]
    design = np.column_stack([np.ones(y.size - 1), y[:-1], X[1:]])
    coef, *_ = np.linalg.lstsq(design, y[1:], rcond=None)
    eps0 = y[1:] - design @ coef
    sigma0 = float(np.mean(np.abs(eps0)))
    scale = max(sigma0, 1e-8)

    def objective(theta):
        _, _, _, omega, alpha, gamma, beta, nu = _unpack(theta, p)
        pers = alpha * (1.0 + abs(gamma)) + beta
        penalty = 1e4 * max(0.0, pers - STATIONARITY_CAP) ** 2
        ll = _loglik(theta, y, X)
        if not np.isfinite(ll):
            return 1e12
        return -ll / y.size + penalty

    bounds = (
        [(None, None), (-0.99, 0.99)]
        + [(None, None)] * p
        + [(1e-8 * scale, 10.0 * scale), (0.0, 0.99), (-0.99, 0.99), (0.0, 0.999), (2.1, 100.0)]
    )
    rng = np.random.default_rng(seed)
    base_alpha, base_beta, base_nu = 0.05, 0.85, 8.0

    def start_vector(alpha, beta, gamma, nu):
        omega = sigma0 * (1.0 - beta - alpha * _abs_t_mean(nu))
        omega = max(omega, 0.01 * sigma0)
        return np.concatenate([coef, [omega, alpha, gamma, beta, nu]])

    inits = [start_vector(base_alpha, base_beta, 0.0, base_nu)]
    for _ in range(starts - 1):
        inits.append(start_vector(
            rng.uniform(0.02, 0.2), rng.uniform(0.5, 0.9), rng.uniform(-0.3, 0.3), rng.uniform(4.0, 15.0)
        ))
    if warm_start is not None and warm_start.n_exog == p:
        inits[-1] = warm_start.params()

    best, best_val, start_val = None, np.inf, np.inf
    for theta0 in inits:
        theta0 = np.array([np.clip(v, lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
                           for v, (lo, hi) in zip(theta0, bounds)])
        start_val = min(start_val, objective(theta0))
        res = optimize.minimize(objective, theta0, method="L-BFGS-B", bounds=bounds)
        if res.fun < best_val:
            best, best_val = res.x, res.fun
    converged = best_val <= start_val
    mu, phi, bx, omega, alpha, gamma, beta, nu = _unpack(best, p)
    pers = alpha * (1.0 + abs(gamma)) + beta
    if pers >= STATIONARITY_CAP:
        shrink = (STATIONARITY_CAP - 1e-6) / pers
        alpha, beta = alpha * shrink, beta * shrink
        converged = False
        warnings.warn("AVT-GARCH estimate projected back into the stationarity region")
    theta = np.concatenate([[mu, phi], bx, [omega, alpha, gamma, beta, nu]])
    eps = _residuals(y, X, mu, phi, bx)
    s0 = float(np.mean(np.abs(eps)))
    return ArxAvtGarchModel(
        float(mu), float(phi), tuple(float(b) for b in bx), float(omega), float(alpha), float(gamma),
        float(beta), float(nu), sigma0=s0, loglik=_loglik(theta, y, X, s0), converged=converged,
    )


def loglik_at(model, y, X=None):
    y, X = _check_inputs(y, X)
    return _loglik(model.params(), y, X, model.sigma0)


def filter_arx_avtgarch(model, y, X=None):
    """Residuals and scales over a sample; returns ``(eps, sigma)`` aligned with ``y[1:]``."""
    y, X = _check_inputs(y, X)
    eps = _residuals(y, X, model.mu, model.phi, np.asarray(model.beta_x))
    sig = _sigma_path(eps, model.omega, model.alpha, model.gamma, model.beta, model.sigma0)
    return eps, sig


def next_sigma(model, sigma_prev, eps_prev):
    return model.omega + model.alpha * (abs(eps_prev) - model.gamma * eps_prev) + model.beta * sigma_prev


def forecast_arx_avtgarch(model, y_prev, x_now, sigma_prev, eps_prev, n, rng, origin=None, name="y"):
    """Monte-Carlo one-step forecast (a single-series :class:`ProbForecast`)."""
    rng = np.random.default_rng(rng)
    sig = next_sigma(model, sigma_prev, eps_prev)
    if not sig > 1e-8:
        warnings.warn(f"forecast scale {sig:.3g} floored at 1e-8")
        sig = 1e-8
    x_now = np.asarray(x_now, dtype=float).ravel()
    loc = model.mu + model.phi * y_prev + (float(np.dot(model.beta_x, x_now)) if model.n_exog else 0.0)
    draws = loc + sig * rng.standard_t(model.nu, size=n)
    return ProbForecast(draws, origin, (name,))


def simulate_arx_avtgarch(model, T, rng, X=None, burn=500):
    """Simulate ``T`` observations (after ``burn`` discarded steps)."""
    rng = np.random.default_rng(rng)
    p = model.n_exog
    total = T + burn
    if p:
        X = np.asarray(X, dtype=float)
        if X.shape != (T, p):
            raise DomainError(f"X must have shape ({T}, {p})")
        X = np.vstack([np.zeros((burn, p)), X])
    z = rng.standard_t(model.nu, size=total)
    y = np.zeros(total)
    sig = model.omega / max(1e-6, 1.0 - model.beta - model.alpha * _abs_t_mean(model.nu))
    eps_prev = 0.0
    bx = np.asarray(model.beta_x)
    for t in range(1, total):
        sig = next_sigma(model, sig, eps_prev)
        eps_prev = sig * z[t]
        y[t] = model.mu + model.phi * y[t - 1] + (X[t] @ bx if p else 0.0) + eps_prev
    return y[burn:]
