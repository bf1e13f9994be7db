"""Forecast evaluation: sample CRPS, RMSE and the aggregated score tables."""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

# column order of the probabilistic (CRPS) and point (RMSE) tables
CRPS_COLUMNS = ("stem_dvine", "avtgarch", "tem_t", "stem_t", "stem_gaussian")
RMSE_COLUMNS = ("stem_dvine:ann", "avtgarch:mean", "stem_dvine:mean", "stem_dvine:mode", "tem_t:ann")

LABELS = {
    "stem_dvine": "S-Tem D-Vine",
    "avtgarch": "AVT-GARCH (simplified)",
    "tem_t": "Tem-t",
    "stem_t": "S-Tem-t",
    "stem_gaussian": "S-Tem-gaussian",
    "stem_dvine:ann": "S-Tem D-Vine ANN",
    "avtgarch:mean": "AVT-GARCH (simplified)",
    "stem_dvine:mean": "S-Tem D-Vine Mean",
    "stem_dvine:mode": "S-Tem D-Vine Mode",
    "tem_t:ann": "Tem-t ANN",
}


def crps_sample(samples, y):
    """Sample CRPS ``mean|x - y| - sum|x_i - x_j| / (2 n^2)``.

    The double sum is evaluated in O(n log n) from the order statistics:
    ``sum_ij |x_i - x_j| = 2 sum_i (2i - n + 1) x_(i)`` (0-based ``i``).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("CRPS needs at least 2 samples")
    if not (np.all(np.isfinite(x)) and np.isfinite(y)):
        raise DomainError("CRPS inputs must be finite")
    n = x.size
    # centering on y is exact (the weights sum to zero) and avoids cancellation for large offsets
    xs = np.sort(x) - y
    spread = 2.0 * np.dot(2.0 * np.arange(n) - n + 1.0, xs)
    return max(0.0, float(np.mean(np.abs(xs)) - spread / (2.0 * n * n)))


def rmse(preds, actuals):
    p = np.asarray(preds, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if p.size != a.size:
        raise DomainError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise DomainError("rmse needs at least one value")
    return float(np.sqrt(np.mean((p - a) ** 2)))


@dataclass
class ScoreReport:
    """Aggregated scores keyed by ``(model, series)``.

    ``crps`` keys are model ids; ``rmse`` keys are ``model:point`` ids such
    as ``stem_dvine:ann``.
    """

    crps: dict = field(default_factory=dict)
    rmse: dict = field(default_factory=dict)
    n_crps: dict = field(default_factory=dict)
    n_rmse: dict = field(default_factory=dict)
    crps_window: tuple = (None, None)
    rmse_window: tuple = (None, None)
    series: tuple = ()
    footnotes: list = field(default_factory=list)

    def crps_table(self, columns=CRPS_COLUMNS):
        return _table(self.crps, self.series, columns)

    def rmse_table(self, columns=RMSE_COLUMNS):
        return _table(self.rmse, self.series, columns)

    def to_csv(self, which="crps", delimiter=","):
        header, rows = self.crps_table() if which == "crps" else self.rmse_table()
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(["series"] + list(header))
        for name, vals in rows:
            w.writerow([name] + ["" if v is None else f"{v:.6f}" for v in vals])
        return buf.getvalue()

    def to_text(self, which="crps"):
        header, rows = self.crps_table() if which == "crps" else self.rmse_table()
        labels = [LABELS.get(h, h) for h in header]
        window = self.crps_window if which == "crps" else self.rmse_window
        counts = self.n_crps if which == "crps" else self.n_rmse
        n = max(counts.values()) if counts else 0
        title = "Aggregated CRPS" if which == "crps" else "Aggregated RMSE"
        lines = [f"{title}: {window[0]} -- {window[1]}, {n} forecasts"]
        width0 = max([len("Series")] + [len(s) for s, _ in rows])
        widths = [max(len(lab), 8) for lab in labels]
        lines.append("  ".join(["Series".ljust(width0)] + [lab.rjust(w) for lab, w in zip(labels, widths)]))
        for name, vals in rows:
            cells = ["-" if v is None else f"{v:.4f}" for v in vals]
            lines.append("  ".join([name.ljust(width0)] + [c.rjust(w) for c, w in zip(cells, widths)]))
        for note in self.footnotes:
            lines.append(f"* {note}")
        return "\n".join(lines) + "\n"


def _table(values, series, columns):
    """Listed columns that have values, then any other scored columns in sorted order."""
    present = {c for c, _ in values}
    cols = [c for c in columns if c in present] + sorted(present - set(columns))
    rows = [(s, [values.get((c, s)) for c in cols]) for s in series]
    return cols, rows


@dataclass(frozen=True)
class ScoreRecord:
    """One scored forecast for a single (model, series, origin)."""

    model: str
    series: str
    origin: object
    realized: float
    crps: float
    points: dict = field(default_factory=dict)  # point kind -> value
    in_rmse_window: bool = True


def aggregate_report(records, footnotes=()):
    """Mean CRPS and RMSE per (model, series).

    CRPS averages every record; RMSE uses only records flagged
    ``in_rmse_window`` and is computed per point-forecast kind.
    """
    records = list(records)
    if not records:
        raise DomainError("cannot aggregate an empty record set")
    crps_acc, sq_acc = {}, {}
    origins, rmse_origins = [], []
    series = []
    for r in records:
        if r.series not in series:
            series.append(r.series)
        crps_acc.setdefault((r.model, r.series), []).append(r.crps)
        origins.append(r.origin)
        if r.in_rmse_window:
            rmse_origins.append(r.origin)
            for kind, val in r.points.items():
                if val is None or not np.isfinite(val):
                    continue
                sq_acc.setdefault((f"{r.model}:{kind}", r.series), []).append((val - r.realized) ** 2)
    report = ScoreReport(series=tuple(series), footnotes=list(footnotes))
    for key, vals in crps_acc.items():
        report.crps[key] = float(np.mean(vals))
        report.n_crps[key] = len(vals)
    for key, vals in sq_acc.items():
        report.rmse[key] = float(np.sqrt(np.mean(vals)))
        report.n_rmse[key] = len(vals)
    report.crps_window = (min(origins), max(origins))
    if rmse_origins:
        report.rmse_window = (min(rmse_origins), max(rmse_origins))
    return report
