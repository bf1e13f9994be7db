"""Nonparametric (empirical) marginal distributions.

Pseudo-observations are ``rank / (n + 1)`` with midranks for ties.  Both the
probability integral transform and its inverse interpolate linearly between
order statistics and clamp outside the sample range.
"""
import numpy as np

from .exceptions import DomainError, FitError


class EmpiricalMarginal:
    """Empirical distribution of one training sample.

    Parameters
    ----------
    sample : array_like
        At least two finite observations, in data units.
    """

    def __init__(self, sample):
        x = np.asarray(sample, dtype=float).ravel()
        if x.size < 2:
            raise FitError("an empirical marginal needs at least 2 observations")
        if not np.all(np.isfinite(x)):
            raise FitError("sample contains non-finite values")
        self.sorted_sample = np.sort(x)
        self.sorted_sample.setflags(write=False)
        n = x.size
        knots, first, counts = np.unique(self.sorted_sample, return_index=True, return_counts=True)
        # midrank (1-based) of each distinct value
        midranks = first + 0.5 * (counts - 1) + 1.0
        self._knots = knots
        self._levels = midranks / (n + 1.0)

    @property
    def n(self):
        return self.sorted_sample.size

    @property
    def bounds(self):
        """Smallest and largest attainable pseudo-observation."""
        return 1.0 / (self.n + 1.0), self.n / (self.n + 1.0)

    def pit(self, x):
        """Probability integral transform into ``[1/(n+1), n/(n+1)]``."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("pit needs finite inputs")
        lo, hi = self.bounds
        return np.interp(x, self._knots, self._levels, left=lo, right=hi)

    def quantile(self, u):
        """Piecewise-linear inverse of :meth:`pit`."""
        u = np.asarray(u, dtype=float)
        if not np.all((u > 0.0) & (u < 1.0)):
            raise DomainError("quantile levels must lie strictly inside (0, 1)")
        return np.interp(u, self._levels, self._knots)

    def out_of_range(self, x):
        """True where ``x`` falls outside the training range (pit is clamped)."""
        x = np.asarray(x, dtype=float)
        return (x < self.sorted_sample[0]) | (x > self.sorted_sample[-1])

    def __repr__(self):
        return f"EmpiricalMarginal(n={self.n})"


def fit_empirical(sample):
    return EmpiricalMarginal(sample)


def pit(m, x):
    return m.pit(x)


def quantile(m, u):
    return m.quantile(u)
