"""PNG figures for the ``report`` command.

Figures are built on :class:`matplotlib.figure.Figure` directly, so no
pyplot state or interactive backend is involved.
"""
import numpy as np
from matplotlib.figure import Figure
from scipy import stats

from . import numerics
from .elliptical import EllipticalCopula, conditional_sample_elliptical, sample_elliptical
from .scoring import LABELS


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    return path


def conditional_density_figure(path, rho=0.4, nu=2.0, levels=(0.03, 0.5, 0.97), n=100_000, seed=0):
    """Scatter of the temporal t copula plus conditional densities on the normal scale."""
    rng = np.random.default_rng(seed)
    cop = EllipticalCopula("t", [[1.0, rho], [rho, 1.0]], nu)
    fig = Figure(figsize=(9, 7))
    ax = fig.add_subplot(2, 2, 1)
    u = sample_elliptical(cop, 2000, rng)
    ax.scatter(u[:, 1], u[:, 0], s=3, alpha=0.5)
    for lev in levels:
        ax.axvline(lev, color="C3", lw=0.8)
    ax.set_xlabel("$u_{t-1}$")
    ax.set_ylabel("$u_t$")
    ax.set_title(f"t copula, rho={rho}, nu={nu}")
    grid = np.linspace(-4.0, 4.0, 401)
    for k, lev in enumerate(levels[:3]):
        ax = fig.add_subplot(2, 2, k + 2)
        z = numerics.std_normal_quantile(conditional_sample_elliptical(cop, [lev], n, rng)[:, 0])
        ax.hist(z, bins=120, range=(-4, 4), density=True, alpha=0.35)
        ax.plot(grid, stats.gaussian_kde(z[:20_000])(grid), color="C1")
        ax.set_title(f"conditional density given $u_{{t-1}}$ = {lev}")
        ax.set_xlabel("$x_t$")
    return _save(fig, path)


def score_bars_figure(report, path, which="crps"):
    header, rows = report.crps_table() if which == "crps" else report.rmse_table()
    fig = Figure(figsize=(1.6 + 1.4 * len(rows), 4.2))
    ax = fig.add_subplot(1, 1, 1)
    width = 0.8 / max(len(header), 1)
    x = np.arange(len(rows))
    for j, col in enumerate(header):
        vals = [np.nan if v[j] is None else v[j] for _, v in rows]
        ax.bar(x + j * width, vals, width, label=LABELS.get(col, col))
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([name for name, _ in rows])
    ax.set_ylabel("mean CRPS" if which == "crps" else "RMSE")
    ax.legend(fontsize=7)
    return _save(fig, path)


def forecast_density_figure(samples, path, realized=None, series_names=None, title=None):
    """Per-series histogram and KDE of one Monte-Carlo forecast."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = samples.shape[1]
    names = series_names or [f"s{i}" for i in range(d)]
    fig = Figure(figsize=(3.2 * d, 3.0))
    for s in range(d):
        ax = fig.add_subplot(1, d, s + 1)
        x = samples[:, s]
        grid = np.linspace(*np.quantile(x, [0.001, 0.999]), 300)
        ax.hist(x, bins=60, density=True, alpha=0.35)
        if np.ptp(x) > 0:
            ax.plot(grid, stats.gaussian_kde(x)(grid), color="C1")
        if realized is not None:
            ax.axvline(realized[s], color="C3", lw=1.0)
        ax.set_title(names[s])
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def panel_figure(dataset, path):
    """Levels and first differences of every series."""
    d = dataset.d
    fig = Figure(figsize=(10, 2.0 * d))
    t = dataset.timestamps.astype("datetime64[D]").astype(object)
    for s, name in enumerate(dataset.series_names):
        ax = fig.add_subplot(d, 2, 2 * s + 1)
        ax.plot(t, dataset.levels[:, s], lw=0.6)
        ax.set_ylabel(name)
        ax = fig.add_subplot(d, 2, 2 * s + 2)
        ax.plot(t[1:], dataset.diffs[:, s], lw=0.4)
    return _save(fig, path)


def level_histogram_figure(log_rows, path, model):
    """Histogram of the realized optimal quantile levels per series (PIT diagnostic)."""
    series = sorted({r["series"] for r in log_rows if r["model"] == model})
    fig = Figure(figsize=(3.0 * max(len(series), 1), 2.8))
    for k, s in enumerate(series):
        ax = fig.add_subplot(1, len(series), k + 1)
        lev = [float(r["optimal_level"]) for r in log_rows if r["model"] == model and r["series"] == s]
        ax.hist(lev, bins=20, range=(0, 1))
        ax.set_title(f"{s}")
    fig.suptitle(f"optimal quantile levels, {LABELS.get(model, model)}")
    return _save(fig, path)
