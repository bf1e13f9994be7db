"""Augmented Dickey-Fuller unit-root test (constant, no trend)."""
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, FitError

# asymptotic 1% critical value, constant included
CRITICAL_1PCT = -3.43
MIN_OBS = 50


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lags: int
    nobs: int
    critical_value: float = CRITICAL_1PCT

    @property
    def reject(self):
        """True when the unit-root null is rejected at the 1% level."""
        return self.statistic < self.critical_value


def schwert_lags(T):
    return int(np.floor(12.0 * (T / 100.0) ** 0.25))


def adf_test(series, lags=None):
    """Regress ``dx_t`` on ``1, x_{t-1}, dx_{t-1}, ..., dx_{t-p}`` and return the t-statistic on ``x_{t-1}``.

    ``lags`` defaults to the Schwert rule ``floor(12 (T/100)^(1/4))``.
    """
    x = np.asarray(series, dtype=float).ravel()
    T = x.size
    if T < MIN_OBS:
        raise DomainError(f"ADF test needs at least {MIN_OBS} observations, got {T}")
    p = schwert_lags(T) if lags is None else int(lags)
    dx = np.diff(x)
    y = dx[p:]
    cols = [np.ones(y.size), x[p:-1]]
    for i in range(1, p + 1):
        cols.append(dx[p - i:-i])
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise FitError("ADF regression is rank deficient")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = y.size - X.shape[1]
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    stat = beta[1] / np.sqrt(cov[1, 1])
    return AdfResult(float(stat), p, int(y.size))
