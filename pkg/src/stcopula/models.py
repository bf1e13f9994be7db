"""Markov(1) copula time series models and their probabilistic forecasts.

A model couples ``d`` empirical marginals with one ``2d``-dimensional copula
of the lag-stacked vector ``(u_{t,1..d}, u_{t-1,1..d})``.  Variants:

``tem_t``
    univariate temporal t copula (``d == 1``);
``stem_gaussian`` / ``stem_t``
    spatio-temporal Gaussian / t copula;
``stem_dvine``
    spatio-temporal D-vine.

Forecasting transforms the last observation to pseudo-observations, draws
from the conditional copula of the current block given the lagged block and
maps the draws back through the marginal quantile functions.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .elliptical import EllipticalCopula, conditional_sample_elliptical, fit_elliptical
from .exceptions import DomainError, FitError, StateError
from .marginals import EmpiricalMarginal
from .pair import ALL_CANDIDATES
from .vine import DVineModel, conditional_sample_dvine, fit_dvine

VARIANTS = ("tem_t", "stem_gaussian", "stem_t", "stem_dvine")
MIN_OBS = 100


def default_path_order(d, unlagged=None):
    """Path order with the lagged block mirrored after the current block.

    ``unlagged`` lists the series indices of the current block along the
    path; by default the series appear in reverse so that series 0 sits next
    to its own lag.  For four series this gives ``3 2 1 0 4 5 6 7``.
    """
    unlagged = list(reversed(range(d))) if unlagged is None else [int(i) for i in unlagged]
    if sorted(unlagged) != list(range(d)):
        raise DomainError(f"{unlagged} is not a permutation of the {d} series")
    return unlagged + [d + i for i in reversed(unlagged)]


def lag_stack(u):
    """``(T-1) x 2d`` matrix with columns ``(u_t, u_{t-1})``."""
    u = np.asarray(u, dtype=float)
    return np.hstack([u[1:], u[:-1]])


@dataclass
class ProbForecast:
    """Monte-Carlo forecast: ``samples[i, s]`` is draw ``i`` of series ``s``."""

    samples: np.ndarray
    origin: object = None
    series_names: tuple = ()
    clamped: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.samples.shape[0] < 2:
            raise DomainError("a forecast needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("forecast samples must be finite")

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def d(self):
        return self.samples.shape[1]

    def series(self, s):
        return self.samples[:, s]


def point_mean(f):
    return f.samples.mean(axis=0)


def _kde_mode(x):
    n = x.size
    sd = x.std(ddof=1)
    if not sd > 0:
        return x[0]
    bw = 1.06 * sd * n ** (-0.2)
    dens = np.zeros(n)
    for start in range(0, n, 512):
        block = x[start:start + 512]
        dens[start:start + 512] = np.exp(-0.5 * ((block[:, None] - x[None, :]) / bw) ** 2).sum(axis=1)
    return x[int(np.argmax(dens))]


def count_modes(x, grid=512, prominence=0.03, trim=0.005):
    """Number of local maxima of a Gaussian KDE of ``x`` (Silverman bandwidth).

    The density is evaluated on ``grid`` points spanning the central
    ``1 - 2 trim`` of the sample via binning and convolution.  Peaks whose
    prominence is below ``prominence`` times the highest density are
    ignored, which keeps sampling ripples in the tails from counting.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 30:
        raise DomainError("mode counting needs at least 30 samples")
    lo, hi = np.quantile(x, [trim, 1.0 - trim])
    if not hi > lo:
        return 1
    iqr = np.subtract(*np.quantile(x, [0.75, 0.25]))
    bw = 0.9 * min(x.std(ddof=1), iqr / 1.34) * x.size ** (-0.2)
    if not bw > 0:
        return 1
    counts, edges = np.histogram(x, bins=grid, range=(lo, hi))
    step = edges[1] - edges[0]
    half = int(np.ceil(4.0 * bw / step))
    offs = np.arange(-half, half + 1) * step
    dens = np.convolve(counts, np.exp(-0.5 * (offs / bw) ** 2), mode="same")
    peaks, _ = signal.find_peaks(np.concatenate([[0.0], dens, [0.0]]), prominence=prominence * dens.max())
    return int(peaks.size)


def point_mode(f):
    """Per-series argmax over the samples of a Gaussian KDE (Silverman bandwidth)."""
    if f.n < 30:
        raise DomainError("the mode needs at least 30 samples")
    return np.array([_kde_mode(f.samples[:, s]) for s in range(f.d)])


def point_quantile(f, level):
    if not 0.0 < level < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {level}")
    return np.quantile(f.samples, level, axis=0)


class SpatioTemporalModel:
    """Fitted copula time series model (see module docstring)."""

    def __init__(self, variant, marginals, copula, series_names=None):
        if variant not in VARIANTS:
            raise DomainError(f"unknown variant {variant!r}")
        d = len(marginals)
        if variant == "tem_t" and d != 1:
            raise DomainError("tem_t models a single series")
        dim = copula.dim
        if dim != 2 * d:
            raise DomainError(f"copula dimension {dim} does not match 2 x {d} series")
        if variant == "stem_dvine":
            if not isinstance(copula, DVineModel):
                raise DomainError("stem_dvine needs a DVineModel")
            if sorted(copula.order[:d]) != list(range(d, 2 * d)):
                raise DomainError("the lagged block must form the prefix of the vine order")
        elif not isinstance(copula, EllipticalCopula):
            raise DomainError(f"{variant} needs an EllipticalCopula")
        self.variant = variant
        self.marginals = list(marginals)
        self.copula = copula
        self.series_names = tuple(series_names) if series_names else tuple(f"s{i}" for i in range(d))

    @property
    def d(self):
        return len(self.marginals)

    def forecast(self, x_prev, n, rng, origin=None):
        return forecast_distribution(self, x_prev, n, rng, origin)

    def to_dict(self):
        return {
            "variant": self.variant,
            "series_names": list(self.series_names),
            "marginals": [m.sorted_sample.tolist() for m in self.marginals],
            "copula": self.copula.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        marg = [EmpiricalMarginal(s) for s in d["marginals"]]
        if d["variant"] == "stem_dvine":
            cop = DVineModel.from_dict(d["copula"])
        else:
            cop = EllipticalCopula.from_dict(d["copula"])
        return cls(d["variant"], marg, cop, d.get("series_names"))

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"SpatioTemporalModel({self.variant!r}, d={self.d})"


def fit_st_model(data, variant, candidates=ALL_CANDIDATES, path_order=None, series_names=None):
    """Fit marginals and the lag-stacked copula of one variant.

    Parameters
    ----------
    data : ndarray, shape (T, d)
        Stationary observations (e.g. first differences).
    path_order : sequence of int, optional
        D-vine order over the ``2d`` lag-stacked columns with the lagged
        block last (columns ``d..2d-1`` are lags).  The vine is fitted on
        the reversed order so the lagged block becomes a prefix.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T, d = x.shape
    if T < MIN_OBS:
        raise FitError(f"need at least {MIN_OBS} observations, got {T}")
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}")
    if variant == "tem_t" and d != 1:
        raise DomainError("tem_t models a single series; fit one model per series")
    marginals = [EmpiricalMarginal(x[:, s]) for s in range(d)]
    u = np.column_stack([m.pit(x[:, s]) for s, m in enumerate(marginals)])
    z = lag_stack(u)
    if variant == "stem_gaussian":
        cop = fit_elliptical("gaussian", z).copula
    elif variant in ("stem_t", "tem_t"):
        cop = fit_elliptical("t", z).copula
    else:
        order = default_path_order(d) if path_order is None else [int(i) for i in path_order]
        cop = fit_dvine(z, tuple(reversed(order)), candidates)
    return SpatioTemporalModel(variant, marginals, cop, series_names)


def forecast_distribution(model, x_prev, n, rng, origin=None):
    """One-step-ahead Monte-Carlo forecast given the last observation."""
    if model is None or not getattr(model, "marginals", None):
        raise StateError("model is not fitted")
    x_prev = np.asarray(x_prev, dtype=float).ravel()
    d = model.d
    if x_prev.size != d:
        raise DomainError(f"expected {d} previous values, got {x_prev.size}")
    if not np.all(np.isfinite(x_prev)):
        raise DomainError("previous values must be finite")
    clamped = np.array([m.out_of_range(x) for m, x in zip(model.marginals, x_prev)])
    u_prev = np.array([m.pit(x) for m, x in zip(model.marginals, x_prev)])
    if isinstance(model.copula, DVineModel):
        order = model.copula.order
        prefix = [u_prev[order[k] - d] for k in range(d)]
        draws = conditional_sample_dvine(model.copula, prefix, n, rng)
        u_next = np.empty_like(draws)
        u_next[:, [order[d + c] for c in range(d)]] = draws
    else:
        u_next = conditional_sample_elliptical(model.copula, u_prev, n, rng)
    samples = np.column_stack([m.quantile(u_next[:, s]) for s, m in enumerate(model.marginals)])
    return ProbForecast(samples, origin, model.series_names, clamped)


class TemporalTPanel:
    """One independent ``tem_t`` model per series, forecast jointly."""

    variant = "tem_t"

    def __init__(self, models):
        self.models = list(models)

    @classmethod
    def fit(cls, data, series_names=None):
        x = np.asarray(data, dtype=float)
        names = series_names or [f"s{i}" for i in range(x.shape[1])]
        return cls(fit_st_model(x[:, [s]], "tem_t", series_names=[names[s]]) for s in range(x.shape[1]))

    @property
    def d(self):
        return len(self.models)

    @property
    def series_names(self):
        return tuple(m.series_names[0] for m in self.models)

    def forecast(self, x_prev, n, rng, origin=None):
        rng = np.random.default_rng(rng)
        parts = [m.forecast([x], n, rng) for m, x in zip(self.models, np.ravel(x_prev))]
        samples = np.column_stack([p.samples[:, 0] for p in parts])
        clamped = np.concatenate([p.clamped for p in parts])
        return ProbForecast(samples, origin, self.series_names, clamped)

    def to_dict(self):
        return {"variant": "tem_t", "panel": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d):
        return cls(SpatioTemporalModel.from_dict(m) for m in d["panel"])
