"""Expanding-window forecasting study.

At every origin ``t`` (an index into the first differences) the models are
trained on ``diffs[:t]`` and forecast ``diffs[t]``.  Every forecast is scored
by CRPS.  Point forecasts (mean, mode, ANN-selected quantile) are scored by
RMSE on the records after the ANN training block.
"""
import csv
import io
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ann as annmod
from .data import Dataset
from .exceptions import DomainError, StCopulaError
from .garch import filter_arx_avtgarch, fit_arx_avtgarch, forecast_arx_avtgarch
from .models import ProbForecast, TemporalTPanel, fit_st_model, point_mean, point_mode, point_quantile
from .pair import ALL_CANDIDATES
from .scoring import ScoreRecord, aggregate_report, crps_sample

MODELS = ("stem_dvine", "avtgarch", "tem_t", "stem_t", "stem_gaussian")

LOG_COLUMNS = ("model", "series", "origin", "origin_date", "target_date", "realized", "crps", "mean", "mode",
               "ann", "ann_level", "optimal_level", "clamped", "in_rmse_window")


@dataclass
class BacktestConfig:
    initial_window: int = 1000
    refit_every: int = 1
    mc_samples: int = 1000
    ann_training_forecasts: int = 1000
    models: tuple = MODELS
    seed: int = 0
    candidates: tuple = ALL_CANDIDATES
    path_order: tuple = None
    mode_models: tuple = ("stem_dvine",)
    ann_models: tuple = ("stem_dvine", "tem_t")
    ann_lags: int = annmod.DEFAULT_LAGS
    ann_past_levels: int = annmod.DEFAULT_PAST_LEVELS
    ann_hidden: tuple = annmod.DEFAULT_HIDDEN
    ann_epochs: int = 200
    ann_step_size: float = 0.05
    garch_starts: int = 5
    dump_origins: tuple = ()
    poison_future: bool = False

    def __post_init__(self):
        for name in ("models", "candidates", "mode_models", "ann_models", "ann_hidden", "dump_origins"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.path_order is not None:
            self.path_order = tuple(int(i) for i in self.path_order)

    def validate(self, T=None):
        if self.initial_window < 100:
            raise DomainError("initial_window must be at least 100")
        if self.refit_every < 1:
            raise DomainError("refit_every must be positive")
        if self.mc_samples < 100:
            raise DomainError("mc_samples must be at least 100")
        if self.ann_training_forecasts < 0:
            raise DomainError("ann_training_forecasts must be non-negative")
        unknown = set(self.models) - set(MODELS)
        if unknown:
            raise DomainError(f"unknown models {sorted(unknown)}; choose from {MODELS}")
        if T is not None and not self.initial_window + self.ann_training_forecasts < T:
            raise DomainError(f"initial_window + ann_training_forecasts must be below T = {T}")
        return self

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


def substream(seed, model, origin, purpose):
    """Independent generator for one (model, origin, purpose) triple."""
    return np.random.default_rng([int(seed), zlib.crc32(model.encode()), int(origin), zlib.crc32(purpose.encode())])


def lagged_exog(diffs, s):
    """Other series' previous differences, row-aligned with ``diffs[:, s]`` (first row zero)."""
    others = np.delete(diffs, s, axis=1)
    return np.vstack([np.zeros((1, others.shape[1])), others[:-1]])


class CopulaForecaster:
    """Adapter for the copula variants; ``tem_t`` is a panel of univariate models."""

    def __init__(self, variant, cfg, names):
        self.name, self.cfg, self.names = variant, cfg, names

    def fit(self, hist, previous, rng):
        if self.name == "tem_t":
            return TemporalTPanel.fit(hist, self.names)
        return fit_st_model(hist, self.name, self.cfg.candidates, self.cfg.path_order, self.names)

    def forecast(self, state, hist, n, rng, origin):
        return state.forecast(hist[-1], n, rng, origin)


class GarchForecaster:
    """One ARX-AVT-GARCH per series, regressed on the other series' lags."""

    name = "avtgarch"

    def __init__(self, cfg, names):
        self.cfg, self.names = cfg, names

    def fit(self, hist, previous, rng):
        fits = []
        for s in range(hist.shape[1]):
            warm = previous[s] if previous is not None else None
            seed = int(rng.integers(2 ** 32))
            # a refit starts from the previous optimum alone; the first fit uses every start
            starts = 1 if warm is not None else self.cfg.garch_starts
            fits.append(fit_arx_avtgarch(hist[:, s], lagged_exog(hist, s), starts, seed, warm))
        return fits

    def forecast(self, state, hist, n, rng, origin):
        cols = []
        for s, m in enumerate(state):
            eps, sig = filter_arx_avtgarch(m, hist[:, s], lagged_exog(hist, s))
            x_now = np.delete(hist[-1], s)
            f = forecast_arx_avtgarch(m, hist[-1, s], x_now, sig[-1], eps[-1], n, rng, origin, self.names[s])
            cols.append(f.samples[:, 0])
        return ProbForecast(np.column_stack(cols), origin, self.names)


def build_forecasters(cfg, names):
    out = {}
    for name in cfg.models:
        out[name] = GarchForecaster(cfg, names) if name == "avtgarch" else CopulaForecaster(name, cfg, names)
    return out


@dataclass
class BacktestResult:
    report: object
    log: list
    config: BacktestConfig
    samples: dict = field(default_factory=dict)  # (model, origin) -> n x d samples
    ann_models: dict = field(default_factory=dict)  # (model, series) -> MlpQuantileSelector
    fitted: dict = field(default_factory=dict)  # model -> last fitted state

    def log_csv(self, delimiter=","):
        return format_log(self.log, delimiter)

    def write_log(self, path, delimiter=","):
        with open(path, "w", newline="") as fh:
            fh.write(self.log_csv(delimiter))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return f"{v:.12e}"
    return str(v)


def format_log(rows, delimiter=","):
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in LOG_COLUMNS])
    return buf.getvalue()


def _ann_features(diffs, t, levels, lags, past):
    """Features available at origin ``t``: recent differences and the previous optimal levels."""
    lagged = annmod.lag_features(diffs, t - 1, lags)
    prev = [levels.get(t - k, 0.5) for k in range(1, past + 1)]
    return np.concatenate([lagged, prev])


def expanding_backtest(data, cfg=None, forecasters=None, progress=None):
    """Run the expanding-window study.

    Parameters
    ----------
    data : Dataset or ndarray
        Price panel, or a ``(T-1) x d`` matrix of differences.
    forecasters : dict, optional
        Extra or replacement model adapters keyed by name.  An adapter has
        ``fit(hist, previous, rng)`` and ``forecast(state, hist, n, rng, origin)``
        returning a :class:`~stcopula.models.ProbForecast`.
    progress : callable, optional
        Called as ``progress(done, total)`` after every origin.
    """
    cfg = cfg or BacktestConfig()
    if isinstance(data, Dataset):
        diffs, names, dates = data.diffs, data.series_names, data.timestamps
    else:
        diffs = np.asarray(data, dtype=float)
        names = tuple(f"s{i}" for i in range(diffs.shape[1]))
        dates = None
    Tn, d = diffs.shape
    cfg.validate(Tn + 1)
    models = build_forecasters(cfg, names)
    models.update(forecasters or {})
    if not models:
        raise DomainError("no models configured")

    def date(i):
        return str(dates[i]) if dates is not None else str(i)

    origins = range(cfg.initial_window, Tn)
    ann_end = cfg.initial_window + cfg.ann_training_forecasts
    states = {m: None for m in models}
    fit_errors = {}
    log, records, dumps = [], [], {}
    # per (model, series): origin -> optimal level, and ANN training rows
    levels = {(m, s): {} for m in models for s in range(d)}
    ann_rows = {(m, s): ([], []) for m in models for s in range(d)}
    selectors, ann_notes = {}, []
    n_clamped = 0
    ann_names = [m for m in cfg.ann_models if m in models] if cfg.ann_training_forecasts else []

    for k, t in enumerate(origins):
        if cfg.poison_future:
            visible = diffs.copy()
            visible[t:] = np.nan
        else:
            visible = diffs
        hist = visible[:t]
        if t == ann_end and ann_names:
            selectors.update(_train_selectors(cfg, ann_names, d, ann_rows, ann_notes))
        refit = k % cfg.refit_every == 0
        for name, adapter in models.items():
            if refit:
                try:
                    states[name] = adapter.fit(hist, states[name], substream(cfg.seed, name, t, "fit"))
                except (StCopulaError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    states[name] = None
                    fit_errors.setdefault(name, []).append((date(t), str(exc)))
            if states[name] is None:
                continue
            f = adapter.forecast(states[name], hist, cfg.mc_samples, substream(cfg.seed, name, t, "forecast"),
                                 date(t + 1))
            if t in cfg.dump_origins:
                dumps[(name, t)] = f.samples.copy()
            if f.clamped is not None:
                n_clamped += int(np.sum(f.clamped))
            means = point_mean(f)
            modes = point_mode(f) if name in cfg.mode_models else None
            in_rmse = t >= ann_end
            for s in range(d):
                y = diffs[t, s]
                opt = annmod.optimal_quantile_target(f, s, y)
                feats = _ann_features(visible, t, levels[(name, s)], cfg.ann_lags, cfg.ann_past_levels)
                levels[(name, s)][t] = opt
                if name in ann_names and t < ann_end:
                    ann_rows[(name, s)][0].append(feats)
                    ann_rows[(name, s)][1].append(opt)
                ann_level = ann_point = None
                sel = selectors.get((name, s))
                if sel is not None and in_rmse:
                    ann_level = float(sel.predict(feats))
                    ann_point = float(point_quantile(f, ann_level)[s])
                points = {"mean": float(means[s])}
                if modes is not None:
                    points["mode"] = float(modes[s])
                if ann_point is not None:
                    points["ann"] = ann_point
                crps = crps_sample(f.samples[:, s], y)
                records.append(ScoreRecord(name, names[s], date(t + 1), float(y), crps, points, in_rmse))
                log.append({
                    "model": name, "series": names[s], "origin": t, "origin_date": date(t),
                    "target_date": date(t + 1), "realized": float(y), "crps": crps, "mean": points["mean"],
                    "mode": points.get("mode"), "ann": ann_point, "ann_level": ann_level, "optimal_level": opt,
                    "clamped": bool(f.clamped[s]) if f.clamped is not None else False,
                    "in_rmse_window": in_rmse,
                })
        if progress is not None:
            progress(k + 1, len(origins))

    notes = []
    for name, errs in fit_errors.items():
        first_date, msg = errs[0]
        notes.append(f"{name}: fit failed at {len(errs)} refit(s), first on {first_date} ({msg}); "
                     "the model is excluded until its next successful refit")
    notes.extend(ann_notes)
    if n_clamped:
        notes.append(f"{n_clamped} conditioning value(s) fell outside the training range and were clamped")
    if not records:
        raise DomainError("no forecasts were produced")
    report = aggregate_report(records, notes)
    return BacktestResult(report, log, cfg, dumps, selectors, dict(states))


def _train_selectors(cfg, ann_names, d, ann_rows, notes):
    out = {}
    n_lag = cfg.ann_lags * d
    mask = np.r_[np.ones(n_lag, dtype=bool), np.zeros(cfg.ann_past_levels, dtype=bool)]
    for name in ann_names:
        for s in range(d):
            feats, targets = ann_rows[(name, s)]
            if len(targets) < 50:
                notes.append(f"{name}: only {len(targets)} ANN training records for series {s}; ANN skipped")
                continue
            try:
                res = annmod.mlp_train(np.array(feats), np.array(targets), epochs=cfg.ann_epochs,
                                       step_size=cfg.ann_step_size, rng=substream(cfg.seed, name, s, "ann"),
                                       hidden=cfg.ann_hidden, standardize=mask)
            except StCopulaError as exc:
                notes.append(f"{name}: ANN training failed for series {s} ({exc})")
                continue
            out[(name, s)] = res.model
    return out
