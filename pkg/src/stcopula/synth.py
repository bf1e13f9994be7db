"""Synthetic price panels from known generating models.

A generator description is a plain dict (typically read from JSON)::

    {
      "model": "stem_t",            # stem_t | stem_gaussian | tem_t | stem_dvine | independence | avtgarch
      "T": 2861, "seed": 7,
      "series_names": ["ngas", "oil", "coal", "cef"],
      "start_date": "2010-03-16",
      "initial_prices": [3.0, 60.0, 80.0, 20.0],
      "nu": 2.5,
      "rho_contemporaneous": 0.3,   # scalar or d x d
      "rho_lag": [0.4, 0.05, 0.05, 0.05],
      "rho_cross_lag": 0.0,         # scalar or d x d (off-diagonal used)
      "marginals": [{"family": "normal", "scale": 0.6}, ...]
    }

Alternatively ``"sigma"`` gives the full ``2d x 2d`` correlation matrix of
``(u_t, u_{t-1})``, ``"vine"`` a serialized D-vine (lagged block as prefix)
and ``"garch"`` the parameters of an AVT-GARCH applied to every series.
"""
import numpy as np
import pandas as pd

from . import numerics
from .data import Dataset
from .elliptical import EllipticalCopula, conditional_sample_elliptical, sample_elliptical
from .exceptions import DomainError
from .garch import ArxAvtGarchModel, simulate_arx_avtgarch
from .vine import DVineModel, conditional_sample_dvine, sample_dvine

GENERATORS = ("stem_t", "stem_gaussian", "tem_t", "stem_dvine", "independence", "avtgarch")


def _block(value, d, diag=None):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        a = np.full((d, d), float(a))
    if a.shape != (d, d):
        raise DomainError(f"expected a scalar or a {d}x{d} matrix")
    if diag is not None:
        a = a.copy()
        np.fill_diagonal(a, diag)
    return a


def lag_correlation(d, rho_contemporaneous=0.0, rho_lag=0.0, rho_cross_lag=0.0):
    """Correlation matrix of ``(u_t, u_{t-1})`` for a stationary Markov(1) chain.

    Both blocks share the contemporaneous correlation; the lag block has
    own-lag correlations on its diagonal and cross-lag ones elsewhere.
    """
    r0 = _block(rho_contemporaneous, d, diag=1.0)
    lag = np.broadcast_to(np.asarray(rho_lag, dtype=float), (d,))
    r1 = _block(rho_cross_lag, d, diag=lag)
    sigma = np.block([[r0, r1], [r1.T, r0]])
    numerics.cholesky_factor(sigma)  # raises if not positive definite
    return sigma


def _marginal_quantile(spec, u):
    fam = spec.get("family", "normal")
    loc, scale = float(spec.get("loc", 0.0)), float(spec.get("scale", 1.0))
    if fam == "normal":
        z = numerics.std_normal_quantile(u)
    elif fam == "t":
        z = numerics.student_t_quantile(u, float(spec["df"]))
    else:
        raise DomainError(f"unknown marginal family {fam!r}")
    return loc + scale * z


def _copula_from_spec(spec, d):
    model = spec["model"]
    if model == "stem_dvine":
        if "vine" not in spec:
            raise DomainError("stem_dvine generator needs a 'vine' description (order and trees)")
        vine = DVineModel.from_dict(spec["vine"])
        if vine.dim != 2 * d or sorted(vine.order[:d]) != list(range(d, 2 * d)):
            raise DomainError("generator vine must have the lagged block as its prefix")
        return vine
    if "sigma" in spec:
        sigma = np.asarray(spec["sigma"], dtype=float)
    else:
        sigma = lag_correlation(d, spec.get("rho_contemporaneous", 0.0), spec.get("rho_lag", 0.0),
                                spec.get("rho_cross_lag", 0.0))
    if sigma.shape != (2 * d, 2 * d):
        raise DomainError(f"sigma must be {2 * d}x{2 * d}")
    if model == "stem_gaussian":
        return EllipticalCopula("gaussian", sigma)
    return EllipticalCopula("t", sigma, float(spec["nu"]))


def simulate_pseudo_obs(copula, d, steps, rng):
    """Run the Markov(1) copula chain for ``steps`` transitions; returns ``(steps + 1) x d`` pseudo-observations."""
    u = np.empty((steps + 1, d))
    if isinstance(copula, DVineModel):
        start = sample_dvine(copula, 1, rng)[0]
        u[0] = start[d:]
        order = copula.order
        for t in range(1, steps + 1):
            prefix = [u[t - 1, order[k] - d] for k in range(d)]
            draw = conditional_sample_dvine(copula, prefix, 1, rng)[0]
            u[t, [order[d + c] for c in range(d)]] = draw
    else:
        u[0] = sample_elliptical(copula, 1, rng)[0, d:]
        for t in range(1, steps + 1):
            u[t] = conditional_sample_elliptical(copula, u[t - 1], 1, rng)[0]
    return u


def synth_generate(spec):
    """Simulate a :class:`~stcopula.data.Dataset` from a generator description."""
    spec = dict(spec)
    model = spec.get("model")
    if model not in GENERATORS:
        raise DomainError(f"unknown generator {model!r}; expected one of {GENERATORS}")
    T = int(spec.get("T", 0))
    if T < 3:
        raise DomainError("T must be at least 3")
    names = list(spec.get("series_names") or [])
    d = len(names) or len(spec.get("marginals") or []) or int(spec.get("d", 1))
    names = names or [f"s{i}" for i in range(d)]
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    steps = T - 1  # number of differences

    if model == "avtgarch":
        g = ArxAvtGarchModel.from_dict({**spec["garch"], "beta_x": ()})
        diffs = np.column_stack([simulate_arx_avtgarch(g, steps, rng) for _ in range(d)])
    else:
        marg = spec.get("marginals") or [{"family": "normal", "scale": 1.0}] * d
        if len(marg) != d:
            raise DomainError(f"{len(marg)} marginals for {d} series")
        if model == "independence":
            u = rng.random((steps, d))
        elif model == "tem_t":
            rho = np.broadcast_to(np.asarray(spec["rho_lag"], dtype=float), (d,))
            cols = []
            for s in range(d):
                cop = EllipticalCopula("t", [[1.0, rho[s]], [rho[s], 1.0]], float(spec["nu"]))
                cols.append(simulate_pseudo_obs(cop, 1, steps, rng)[1:, 0])
            u = np.column_stack(cols)
        else:
            u = simulate_pseudo_obs(_copula_from_spec(spec, d), d, steps, rng)[1:]
        diffs = np.column_stack([_marginal_quantile(marg[s], u[:, s]) for s in range(d)])

    p0 = np.broadcast_to(np.asarray(spec.get("initial_prices", 100.0), dtype=float), (d,))
    levels = np.vstack([p0, p0 + np.cumsum(diffs, axis=0)])
    dates = pd.bdate_range(spec.get("start_date", "2010-03-16"), periods=T).to_numpy().astype("datetime64[D]")
    return Dataset(dates, levels, tuple(names))
