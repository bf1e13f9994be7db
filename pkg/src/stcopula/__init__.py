"""Spatio-temporal copula time series models for probabilistic forecasting."""
from .backtest import BacktestConfig, BacktestResult, expanding_backtest
from .data import Dataset, difference, locf_impute, read_csv
from .elliptical import EllipticalCopula, fit_elliptical
from .exceptions import (DomainError, FactorizationError, FitError, NumericError, SelectionError, StateError,
                         StCopulaError, TrainingError)
from .garch import ArxAvtGarchModel, fit_arx_avtgarch, forecast_arx_avtgarch
from .marginals import EmpiricalMarginal, fit_empirical
from .models import (ProbForecast, SpatioTemporalModel, TemporalTPanel, count_modes, fit_st_model,
                     forecast_distribution, point_mean, point_mode, point_quantile)
from .pair import PairCopula, fit_pair_mle, select_pair_family
from .scoring import ScoreReport, aggregate_report, crps_sample, rmse
from .synth import synth_generate
from .vine import DVineModel, fit_dvine

__version__ = "0.1.0"
