"""Command line interface: ``stcopula <command> [options]``.

Commands
--------
ingest    read CSV price files, align, impute, screen with the ADF test
simulate  generate a synthetic panel from a generator description
fit       fit models on a dataset and store them as JSON
forecast  one-step Monte-Carlo forecast from stored models
backtest  expanding-window study with record log and score tables
report    score tables and PNG figures from a backtest directory
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adf import adf_test
from .backtest import MODELS, BacktestConfig, expanding_backtest
from .data import read_csv
from .exceptions import StCopulaError
from .garch import ArxAvtGarchModel, filter_arx_avtgarch, fit_arx_avtgarch, forecast_arx_avtgarch
from .models import ProbForecast, SpatioTemporalModel, TemporalTPanel, fit_st_model, point_mean, point_mode
from .scoring import ScoreRecord, aggregate_report
from .synth import synth_generate

log = logging.getLogger("stcopula")


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _backtest_section(cfg):
    return dict(cfg.get("backtest", {k: v for k, v in cfg.items() if k != "generator"}))


def _models(args, default=MODELS):
    if not args.models:
        return tuple(default)
    names = tuple(m.strip() for m in args.models.split(",") if m.strip())
    unknown = set(names) - set(MODELS)
    if unknown:
        raise SystemExit(f"unknown models: {', '.join(sorted(unknown))}")
    return names


def _outdir(args):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args):
    ds = read_csv(args.inputs, args.names.split(",") if args.names else None)
    out = _outdir(args)
    ds.to_csv(out / "dataset.csv")
    rows = []
    for s, name in enumerate(ds.series_names):
        lev, dif = adf_test(ds.levels[:, s]), adf_test(ds.diffs[:, s])
        rows.append([name, f"{lev.statistic:.4f}", int(lev.reject), f"{dif.statistic:.4f}", int(dif.reject)])
    with open(out / "adf.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "levels_stat", "levels_reject", "diffs_stat", "diffs_reject"])
        w.writerows(rows)
    print(f"{ds.T} observations of {ds.d} series, {ds.timestamps[0]} to {ds.timestamps[-1]}")
    for r in rows:
        flag = "stationary" if r[4] else "NOT stationary at 1%"
        print(f"  {r[0]}: ADF levels {r[1]}, differences {r[3]} ({flag})")
    return 0


def cmd_simulate(args):
    cfg = _load_config(args.config)
    spec = dict(cfg.get("generator", cfg))
    if args.seed is not None:
        spec["seed"] = args.seed
    ds = synth_generate(spec)
    out = _outdir(args)
    ds.to_csv(out / "dataset.csv")
    print(f"simulated {ds.T} observations of {ds.d} series from {spec['model']} -> {out / 'dataset.csv'}")
    return 0


def _fit_one(name, diffs, names, cfg, seed):
    if name == "tem_t":
        return TemporalTPanel.fit(diffs, names).to_dict()
    if name == "avtgarch":
        fits = []
        for s in range(diffs.shape[1]):
            others = np.delete(diffs, s, axis=1)
            X = np.vstack([np.zeros((1, others.shape[1])), others[:-1]])
            fits.append(fit_arx_avtgarch(diffs[:, s], X, cfg.garch_starts, seed).to_dict())
        return {"variant": "avtgarch", "series_names": list(names), "fits": fits}
    return fit_st_model(diffs, name, cfg.candidates, cfg.path_order, names).to_dict()


def cmd_fit(args):
    cfg = BacktestConfig.from_dict(_backtest_section(_load_config(args.config)))
    names = _models(args, cfg.models)
    ds = read_csv(args.data)
    out = _outdir(args)
    seed = cfg.seed if args.seed is None else args.seed
    for name in names:
        doc = _fit_one(name, ds.diffs, ds.series_names, cfg, seed)
        (out / f"model_{name}.json").write_text(json.dumps(doc, indent=1))
        print(f"fitted {name} on {ds.diffs.shape[0]} differences -> {out / f'model_{name}.json'}")
    return 0


def _forecast_from_doc(doc, diffs, n, rng):
    if doc["variant"] == "tem_t":
        return TemporalTPanel.from_dict(doc).forecast(diffs[-1], n, rng)
    if doc["variant"] == "avtgarch":
        cols = []
        for s, fd in enumerate(doc["fits"]):
            m = ArxAvtGarchModel.from_dict(fd)
            others = np.delete(diffs, s, axis=1)
            X = np.vstack([np.zeros((1, others.shape[1])), others[:-1]])
            eps, sig = filter_arx_avtgarch(m, diffs[:, s], X)
            f = forecast_arx_avtgarch(m, diffs[-1, s], others[-1], sig[-1], eps[-1], n, rng)
            cols.append(f.samples[:, 0])
        return ProbForecast(np.column_stack(cols), None, tuple(doc["series_names"]))
    return SpatioTemporalModel.from_dict(doc).forecast(diffs[-1], n, rng)


def cmd_forecast(args):
    ds = read_csv(args.data)
    cfg = BacktestConfig.from_dict(_backtest_section(_load_config(args.config)))
    out = _outdir(args)
    model_dir = Path(args.model_dir or args.output_dir)
    seed = cfg.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    names = _models(args, cfg.models)
    for name in names:
        path = model_dir / f"model_{name}.json"
        if not path.exists():
            raise SystemExit(f"{path} not found; run `stcopula fit` first")
        f = _forecast_from_doc(json.loads(path.read_text()), ds.diffs, cfg.mc_samples, rng)
        samples = f.samples
        np.savetxt(out / f"forecast_{name}.csv", samples, delimiter=",", fmt="%.10e",
                   header=",".join(ds.series_names), comments="")
        mean, mode = point_mean(f), point_mode(f)
        print(f"{name}: next difference after {ds.timestamps[-1]}")
        for s, sn in enumerate(ds.series_names):
            q05, q95 = np.quantile(samples[:, s], [0.05, 0.95])
            print(f"  {sn}: mean {mean[s]:.4f}  mode {mode[s]:.4f}  90% interval [{q05:.4f}, {q95:.4f}]")
    return 0


def cmd_backtest(args):
    raw = _load_config(args.config)
    section = _backtest_section(raw)
    if args.seed is not None:
        section["seed"] = args.seed
    if args.models:
        section["models"] = list(_models(args))
    cfg = BacktestConfig.from_dict(section)
    if args.data:
        ds = read_csv(args.data)
    elif "generator" in raw:
        ds = synth_generate(raw["generator"])
    else:
        raise SystemExit("backtest needs --data or a config with a generator section")
    out = _outdir(args)

    def progress(done, total):
        if done % 100 == 0 or done == total:
            log.info("origin %d / %d", done, total)

    res = expanding_backtest(ds, cfg, progress=progress)
    res.write_log(out / "records.csv")
    (out / "backtest_config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    (out / "footnotes.txt").write_text("".join(n + "\n" for n in res.report.footnotes))
    for (model, origin), samples in res.samples.items():
        np.savetxt(out / f"samples_{model}_{origin}.csv", samples, delimiter=",", fmt="%.10e",
                   header=",".join(ds.series_names), comments="")
    _write_tables(res.report, out)
    print(res.report.to_text("crps"))
    print(res.report.to_text("rmse"))
    return 0


def _write_tables(report, out):
    for which in ("crps", "rmse"):
        (out / f"{which}.csv").write_text(report.to_csv(which))
        (out / f"{which}.txt").write_text(report.to_text(which))


def read_record_log(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report_from_log(rows, footnotes=()):
    """Rebuild the aggregated score tables from a record log."""
    recs = []
    for r in rows:
        points = {k: float(r[k]) for k in ("mean", "mode", "ann") if r.get(k)}
        recs.append(ScoreRecord(r["model"], r["series"], r["target_date"], float(r["realized"]), float(r["crps"]),
                                points, r["in_rmse_window"] == "1"))
    return aggregate_report(recs, footnotes)


def cmd_report(args):
    from . import plotting

    out = Path(args.output_dir)
    rows = read_record_log(out / "records.csv")
    notes_path = out / "footnotes.txt"
    notes = [ln for ln in notes_path.read_text().splitlines() if ln] if notes_path.exists() else []
    report = report_from_log(rows, notes)
    _write_tables(report, out)
    print(report.to_text("crps"))
    print(report.to_text("rmse"))
    figs = [plotting.score_bars_figure(report, out / "crps.png", "crps"),
            plotting.score_bars_figure(report, out / "rmse.png", "rmse"),
            plotting.conditional_density_figure(out / "conditional_density.png", seed=args.seed or 0)]
    for model in sorted({r["model"] for r in rows}):
        figs.append(plotting.level_histogram_figure(rows, out / f"levels_{model}.png", model))
    for path in sorted(out.glob("samples_*_*.csv")):
        samples = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        figs.append(plotting.forecast_density_figure(samples, path.with_suffix(".png"), title=path.stem))
    print("figures: " + ", ".join(Path(f).name for f in figs))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="stcopula", description="Spatio-temporal copula forecasting toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sp.add_argument("--models", help=f"comma-separated subset of {','.join(MODELS)}")
        sp.add_argument("--output-dir", default=".", help="directory for outputs")
        if data:
            sp.add_argument("--data", help="dataset CSV (date column plus one column per series)")

    sp = sub.add_parser("ingest", help="read, align and impute CSV price files")
    sp.add_argument("inputs", nargs="+", help="one wide CSV or one CSV per series")
    sp.add_argument("--names", help="comma-separated series names")
    common(sp, data=False)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(sp, data=False)
    sp.set_defaults(func=cmd_simulate)

    for name, func, text in (("fit", cmd_fit, "fit models on a dataset"),
                             ("forecast", cmd_forecast, "one-step forecast from fitted models")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        if name == "forecast":
            sp.add_argument("--model-dir", help="directory holding model_*.json (default: output dir)")
        sp.set_defaults(func=func)

    sp = sub.add_parser("backtest", help="expanding-window forecasting study")
    common(sp)
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("report", help="tables and figures from a backtest output directory")
    common(sp, data=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except StCopulaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
