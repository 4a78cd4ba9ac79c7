# -*- coding: utf-8 -*-

"""Command line entry point.

Every subcommand reads an INI config (see :mod:`quanteasy.config`), writes its
artifacts under ``--out`` (default ``[paths] output``) together with the
effective ``config.ini``, and exits with 0 on success, 2 on configuration
errors, 3 on data errors and 4 on numerical failures.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import caviar
from .arfima import MIN_TRUNCATION, fit_arfima, forecast_mixture_horizons
from .config import RunConfig, load_config
from .errors import ConfigError, NoStableRegion, NoValidDays, QuantEasyError
from .impvol import implied_vol_index, load_quotes, load_zero_curve
from .ingest import daily_returns, load_ticks, sample_last_tick, volatility_signature
from .measures import MeasurePanel, summary_statistics
from .models import build_dataset, get_model
from .pipeline import (
    ArfimaForecaster,
    CaviarForecaster,
    LinearQuantileForecaster,
    in_sample_report,
    rolling_forecast_eval,
)
from .plotting import CoverageBars, LossBars, QuantileProcessChart
from .qr import fit_lqr, quantile_process
from .simulate import write_synthetic_dataset
from .util import Tictoc, setup_logging, stream_seed, write_csv, write_json

logger = logging.getLogger(__name__)

__all__ = ["main", "build_parser"]

PROCESS_GRID = np.round(np.arange(1, 20) * 0.05, 2)


def _settings(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.ini")
    return out


def _read_series(path, column) -> pd.Series:
    frame = pd.read_csv(path, parse_dates=["date"]).set_index("date")
    if column not in frame:
        raise ConfigError(f"{path} has no {column!r} column")
    return frame[column].astype(float)


def load_inputs(cfg: RunConfig):
    """Measure panel and daily returns from ``[paths] panel`` or from the tick file."""
    if cfg.panel is not None:
        panel = MeasurePanel.read_csv(cfg.panel)
        returns = _read_series(cfg.returns, "return") if cfg.returns is not None else None
    elif cfg.ticks is not None:
        ticks = load_ticks(cfg.ticks, cfg.tick_schema(), cfg.on_malformed)
        grids = sample_last_tick(ticks, cfg.session_spec())
        panel = MeasurePanel.from_grids(grids, cfg.significance)
        returns = daily_returns(grids)
    else:
        raise ConfigError("[paths] needs either ticks or panel")
    if cfg.implied_vol is not None:
        panel = panel.with_implied_vol(_read_series(cfg.implied_vol, "implied_vol"))
    return panel, returns


def cmd_measures(cfg: RunConfig, args):
    cfg.validate(require=("ticks",))
    out = _out_dir(cfg)
    ticks = load_ticks(cfg.ticks, cfg.tick_schema(), cfg.on_malformed)
    spec = cfg.session_spec()
    grids = sample_last_tick(ticks, spec)
    panel = MeasurePanel.from_grids(grids, cfg.significance)
    returns = daily_returns(grids)
    if cfg.implied_vol is not None:
        panel = panel.with_implied_vol(_read_series(cfg.implied_vol, "implied_vol"))
    panel.to_csv(out / "panel.csv")
    r = returns.to_frame()
    r.index = r.index.strftime("%Y-%m-%d")
    write_csv(r, out / "returns.csv", index=True)
    stats = summary_statistics(panel, returns)
    write_csv(stats, out / "summary.csv", index=True)
    write_json(stats.attrs, out / "jumps.json")
    if args.signature:
        write_csv(volatility_signature(ticks, spec), out / "signature.csv")
    logger.info("%d days, %d jump days", len(panel), int(panel["jump_flag"].sum()))


def _fit_linear(cfg: RunConfig, args, target):
    cfg.validate()
    panel, returns = load_inputs(cfg)
    out = _out_dir(cfg)
    names = args.model or (cfg.return_models if target == "return" else cfg.rv_models)
    alphas = args.alpha or cfg.alphas
    for m, name in enumerate(names):
        spec = get_model(name, cfg.custom_models).with_horizon(args.horizon)
        if spec.target != target:
            raise ConfigError(f"{spec.name} forecasts {spec.target}, this command fits {target} models")
        built = build_dataset(panel, spec, returns)
        boot = cfg.bootstrap_config(stream_seed(cfg.seed, m))
        fits = [fit_lqr(built.dataset, a, bootstrap=boot) for a in alphas]
        stem = f"{spec.name}_h{args.horizon}"
        write_json(
            {
                "model": spec.name,
                "horizon": args.horizon,
                "spec": spec.to_text(),
                "n": built.dataset.n,
                "dropped_warmup": built.dropped_warmup,
                "dropped_degenerate": built.dropped_degenerate,
                "fits": [f.to_dict() for f in fits],
            },
            out / f"fit_{stem}.json",
        )
        write_csv(pd.concat([f.coefficient_table() for f in fits], ignore_index=True), out / f"coefficients_{stem}.csv")
        if args.quantile_process:
            process = quantile_process(built.dataset, PROCESS_GRID, bootstrap=boot, progbar=args.progbar)
            write_csv(process.coefficient_table(), out / f"quantile_process_{stem}.csv")
            if args.plot:
                QuantileProcessChart(process, title=spec.name).save(out / f"quantile_process_{stem}.svg")


def cmd_fit_returns(cfg, args):
    _fit_linear(cfg, args, "return")


def cmd_fit_rv(cfg, args):
    _fit_linear(cfg, args, "rv_sqrt")


def cmd_fit_caviar(cfg: RunConfig, args):
    cfg.validate()
    panel, returns = load_inputs(cfg)
    if returns is None:
        raise ConfigError("CAViaR needs daily returns: set [paths] returns or ticks")
    out = _out_dir(cfg)
    for m, name in enumerate(args.model or cfg.caviar_models):
        fits = []
        for a in args.alpha or cfg.alphas:
            spec = caviar.caviar_spec(name, a, args.horizon, cfg.exog_timing)
            _, r, x = caviar.caviar_inputs(panel, returns, spec)
            seed = stream_seed(cfg.seed, m, int(round(a * 1e6)))
            fit = caviar.fit_caviar(spec, r, x, seed=seed, n_draws=cfg.caviar_draws, n_polish=cfg.caviar_polish)
            try:
                caviar.caviar_std_errors(fit, r, x)
            except NoStableRegion as e:
                logger.warning("%s alpha=%s: %s", spec.name, a, e)
                fit.std_errors = e.table
            fits.append(fit.to_dict())
        name_h = f"{name.upper()}_h{args.horizon}"
        write_json({"model": name.upper(), "horizon": args.horizon, "fits": fits}, out / f"caviar_{name_h}.json")


def _log_rv(panel):
    rv = panel["rv"].astype(float)
    if (rv <= 0).any():
        logger.warning("%d days with zero realized variance carried forward", int((rv <= 0).sum()))
    return np.log(rv.where(rv > 0).ffill().bfill().to_numpy())


def _truncation(cfg, log_rv):
    return max(MIN_TRUNCATION, min(cfg.truncation, len(log_rv)))


def cmd_fit_arfima(cfg: RunConfig, args):
    cfg.validate()
    panel, _ = load_inputs(cfg)
    out = _out_dir(cfg)
    log_rv = _log_rv(panel)
    fit = fit_arfima(log_rv, _truncation(cfg, log_rv), cfg.estimate_ma)
    write_json(fit.to_dict(), out / "arfima.json")
    table = fit.coefficient_table()
    table.index.name = "parameter"
    write_csv(table, out / "arfima_coefficients.csv", index=True)


def cmd_forecast(cfg: RunConfig, args):
    """Quantile forecasts of every configured model from the last panel date."""
    cfg.validate()
    panel, returns = load_inputs(cfg)
    out = _out_dir(cfg)
    origin = panel.dates[-1]
    rows = []

    def add(model, target, h, quantiles):
        for a, q in quantiles.items():
            row = {"origin": origin.strftime("%Y-%m-%d"), "model": model, "target": target}
            rows.append({**row, "alpha": a, "horizon": h, "quantile": q})

    for h in cfg.horizons:
        for name in cfg.return_models + cfg.rv_models:
            spec = get_model(name, cfg.custom_models).with_horizon(h)
            built = build_dataset(panel, spec, returns)
            x = built.design_row(origin)
            if not np.all(np.isfinite(x)):
                logger.warning("%s: regressors unavailable at %s", spec.name, origin.date())
                continue
            add(spec.name, spec.target, h, {a: float(x @ fit_lqr(built.dataset, a).beta) for a in cfg.alphas})
        if returns is not None:
            for m, name in enumerate(cfg.caviar_models):
                qs = {}
                for a in cfg.alphas:
                    spec = caviar.caviar_spec(name, a, h, cfg.exog_timing)
                    _, r, x = caviar.caviar_inputs(panel, returns, spec)
                    seed = stream_seed(cfg.seed, m, h, int(round(a * 1e6)))
                    fit = caviar.fit_caviar(spec, r, x, seed=seed, n_draws=cfg.caviar_draws, n_polish=cfg.caviar_polish)
                    qs[a] = caviar.forecast_next(fit, r, x)
                add(name.upper(), "return", h, qs)
    log_rv = _log_rv(panel)
    truncation = _truncation(cfg, log_rv)
    params = fit_arfima(log_rv, truncation, cfg.estimate_ma).params
    forecasts = forecast_mixture_horizons(
        params, log_rv, cfg.horizons, cfg.alphas, cfg.arfima_draws, cfg.seed, truncation
    )
    for h, fc in forecasts.items():
        add("ARFIMA", "rv_sqrt", h, fc.rv_quantiles)
        add("ARFIMA", "return", h, fc.return_quantiles)
    write_csv(pd.DataFrame(rows), out / "forecast.csv")


def _stages(cfg: RunConfig, target):
    if target == "return":
        stages = [LinearQuantileForecaster(n, cfg.refit_every, cfg.custom_models) for n in cfg.return_models]
        stages += [
            CaviarForecaster(
                n, cfg.caviar_refit_every, cfg.caviar_draws, cfg.caviar_polish, exog_timing=cfg.exog_timing
            )
            for n in cfg.caviar_models
        ]
    else:
        stages = [LinearQuantileForecaster(n, cfg.refit_every, cfg.custom_models) for n in cfg.rv_models]
    stages.append(ArfimaForecaster("ARFIMA", cfg.arfima_refit_every, cfg.truncation, cfg.arfima_draws, cfg.estimate_ma))
    return stages


def _in_sample_models(cfg: RunConfig, returns) -> list:
    models = cfg.return_models + cfg.caviar_models if returns is not None else []
    return models + cfg.rv_models


def cmd_backtest(cfg: RunConfig, args):
    cfg.validate()
    panel, returns = load_inputs(cfg)
    out = _out_dir(cfg)
    targets = ["return", "rv_sqrt"] if args.target == "both" else [args.target]
    if returns is None and "return" in targets:
        logger.warning("no daily returns configured; skipping the return backtest")
        targets.remove("return")
    if args.in_sample:
        models = _in_sample_models(cfg, returns)
        report = in_sample_report(
            panel, returns, models, cfg.alphas, cfg.dq_lags, cfg.mc_reps, cfg.seed, cfg.caviar_draws, cfg.custom_models
        )
        write_csv(report, out / "in_sample.csv")
    for target in targets:
        benchmark = cfg.benchmark_returns if target == "return" else cfg.benchmark_rv
        report = rolling_forecast_eval(
            _stages(cfg, target),
            panel,
            returns,
            target,
            cfg.alphas,
            cfg.horizons,
            cfg.window,
            cfg.n_oos,
            get_model(benchmark, cfg.custom_models).name if benchmark.upper() != "ARFIMA" else "ARFIMA",
            cfg.dq_lags,
            cfg.mc_reps,
            cfg.seed,
            progbar=args.progbar,
        )
        sub = out / target
        report.to_csv(sub)
        report.to_json(sub / "report.json")
        if args.plot:
            CoverageBars(report.table, title=f"coverage, {target}").save(sub / "coverage.svg")
            LossBars(report.table, title=f"tick loss, {target}").save(sub / "tick_loss.svg")


def cmd_impvol(cfg: RunConfig, args):
    cfg.validate(require=("quotes",))
    out = _out_dir(cfg)
    curve = load_zero_curve(cfg.rates) if cfg.rates is not None else None
    quotes = load_quotes(cfg.quotes, curve)
    if not quotes:
        raise NoValidDays(f"{cfg.quotes} holds no quotes")
    index = implied_vol_index(
        quotes, cfg.target_days, cfg.grid_points, cfg.n_std, cfg.min_days, cfg.price_floor, cfg.single_expiry
    )
    index.index = index.index.strftime("%Y-%m-%d")
    write_csv(index, out / "implied_vol_30d.csv", index=True)


def cmd_simulate(cfg: RunConfig, args):
    out = Path(cfg.output)
    paths = write_synthetic_dataset(out, n_days=args.days, seed=cfg.seed, spec=cfg.session_spec())
    cfg.ticks, cfg.implied_vol, cfg.quotes = str(paths["ticks"]), str(paths["implied_vol"]), str(paths["quotes"])
    cfg.output = str(out / "results")
    cfg.write(out / "config.ini")


COMMANDS = {
    "measures": (cmd_measures, "daily realized measures, summary statistics and volatility signature"),
    "fit-returns": (cmd_fit_returns, "full-sample linear quantile models of returns"),
    "fit-rv": (cmd_fit_rv, "full-sample HAR quantile models of RV^(1/2)"),
    "fit-caviar": (cmd_fit_caviar, "full-sample CAViaR models with standard errors"),
    "fit-arfima": (cmd_fit_arfima, "ARFIMA model of log RV"),
    "forecast": (cmd_forecast, "quantile forecasts from the last date"),
    "backtest": (cmd_backtest, "rolling out-of-sample evaluation"),
    "impvol": (cmd_impvol, "30-day model-free implied volatility from option quotes"),
    "simulate": (cmd_simulate, "write a synthetic dataset and a config to run on it"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="INI configuration file")
    common.add_argument("--seed", type=int, help="base seed, overrides [seeds] base")
    common.add_argument("--out", "-o", help="output directory, overrides [paths] output")
    common.add_argument("--plot", action="store_true", help="also write SVG charts")
    common.add_argument("--no-progbar", dest="progbar", action="store_false", help="hide progress bars")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", dest="verbosity", action="store_const", const=1, default=0)
    verbosity.add_argument("-q", "--quiet", dest="verbosity", action="store_const", const=-1)

    parser = argparse.ArgumentParser(
        prog="quanteasy", description="Semiparametric quantile forecasts of returns and realized volatility."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    cmds = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}

    cmds["measures"].add_argument("--signature", action="store_true", help="also write the volatility signature")
    for name in ("fit-returns", "fit-rv", "fit-caviar"):
        p = cmds[name]
        p.add_argument("--model", "-m", action="append", help="model name, repeatable; default: the configured list")
        p.add_argument("--alpha", "-a", type=float, action="append", help="quantile level, repeatable")
        p.add_argument("--horizon", type=int, default=1)
    for name in ("fit-returns", "fit-rv"):
        cmds[name].add_argument(
            "--quantile-process", action="store_true", help="fit alpha = 0.05, ..., 0.95 with bootstrap bands"
        )
    cmds["backtest"].add_argument("--target", choices=["return", "rv_sqrt", "both"], default="both")
    cmds["backtest"].add_argument("--in-sample", action="store_true", help="also evaluate full-sample one-step fits")
    cmds["simulate"].add_argument("--days", type=int, default=1500)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbosity)
    func, _ = COMMANDS[args.command]
    tictoc = Tictoc(output="log")
    tictoc.tic(args.command)
    try:
        func(_settings(args), args)
    except QuantEasyError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    tictoc.toc()
    return 0


if __name__ == "__main__":
    sys.exit(main())
