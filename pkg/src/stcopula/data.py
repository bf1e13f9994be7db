"""Price panels: CSV ingestion, gap imputation and differencing."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DomainError


def locf_impute(values):
    """Fill gaps (NaN) with the last observed value."""
    x = np.array(values, dtype=float).ravel()
    if x.size and np.isnan(x[0]):
        raise DomainError("series starts with a gap; nothing to carry forward")
    idx = np.where(np.isnan(x), 0, np.arange(x.size))
    np.maximum.accumulate(idx, out=idx)
    return x[idx]


def difference(levels):
    """First differences along the time axis."""
    x = np.asarray(levels, dtype=float)
    if x.shape[0] < 2:
        raise DomainError("differencing needs at least 2 observations")
    return x[1:] - x[:-1]


@dataclass
class Dataset:
    """Aligned price levels of ``d`` series.

    ``diffs[i] = levels[i + 1] - levels[i]`` is dated ``timestamps[i + 1]``.
    """

    timestamps: np.ndarray
    levels: np.ndarray
    series_names: tuple = ()
    diffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[D]")
        self.levels = np.asarray(self.levels, dtype=float)
        if self.levels.ndim == 1:
            self.levels = self.levels[:, None]
        T, d = self.levels.shape
        if self.timestamps.shape != (T,):
            raise DomainError(f"{self.timestamps.size} timestamps for {T} observations")
        if T > 1 and not np.all(np.diff(self.timestamps) > np.timedelta64(0, "D")):
            raise DomainError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.levels)):
            raise DomainError("levels contain missing or non-finite values; impute first")
        self.series_names = tuple(self.series_names) or tuple(f"s{i}" for i in range(d))
        if len(self.series_names) != d:
            raise DomainError(f"{len(self.series_names)} names for {d} series")
        self.diffs = difference(self.levels)

    @property
    def T(self):
        return self.levels.shape[0]

    @property
    def d(self):
        return self.levels.shape[1]

    def frame(self):
        df = pd.DataFrame(self.levels, columns=list(self.series_names))
        df.insert(0, "date", pd.to_datetime(self.timestamps).strftime("%Y-%m-%d"))
        return df

    def to_csv(self, path):
        self.frame().to_csv(path, index=False, float_format="%.10g")


def _load_frame(path, value_column=None):
    df = pd.read_csv(path)
    date_col = next((c for c in df.columns if c.lower() in ("date", "time", "timestamp")), df.columns[0])
    df[date_col] = pd.to_datetime(df[date_col], format="ISO8601")
    df = df.set_index(date_col).sort_index()
    if df.index.has_duplicates:
        raise DomainError(f"{path}: duplicate dates")
    if value_column is not None:
        df = df[[value_column]]
    return df.apply(pd.to_numeric, errors="coerce")


def read_csv(paths, names=None):
    """Read one wide CSV or one CSV per series into a :class:`Dataset`.

    The series are aligned on the union of their dates; gaps are then
    filled per series by :func:`locf_impute`.  Dates before every series
    has started are dropped.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    frames = []
    for p in paths:
        df = _load_frame(p)
        if len(paths) > 1 and df.shape[1] == 1:
            df.columns = [Path(p).stem]
        frames.append(df)
    wide = pd.concat(frames, axis=1, join="outer").sort_index()
    if names:
        wide.columns = list(names)
    first_valid = max(wide[c].first_valid_index() for c in wide.columns)
    wide = wide.loc[first_valid:]
    levels = np.column_stack([locf_impute(wide[c].to_numpy()) for c in wide.columns])
    return Dataset(wide.index.to_numpy().astype("datetime64[D]"), levels, tuple(map(str, wide.columns)))
