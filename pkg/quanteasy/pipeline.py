# -*- coding: utf-8 -*-

"""Rolling out-of-sample evaluation of quantile forecasters."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from . import arfima, caviar
from .errors import DegenerateVariance, ExplosivePath, InsufficientHistory, NumericalError, SeriesTooShort
from .evaluation import (
    DEFAULT_DQ_LAGS,
    DEFAULT_MC_REPS,
    coverage_std_error,
    dm_test,
    dq_test,
    hits,
    tick_loss_series,
)
from .measures import MeasurePanel
from .models import ModelSpec, build_dataset, direct_targets, get_model
from .qr import fit_lqr
from .util import Tictoc, progress, stream_seed, write_csv, write_json

logger = logging.getLogger(__name__)

__all__ = [
    "Backtest",
    "BacktestReport",
    "ForecastStage",
    "LinearQuantileForecaster",
    "CaviarForecaster",
    "ArfimaForecaster",
    "rolling_forecast_eval",
    "in_sample_report",
    "DEFAULT_BENCHMARKS",
]

DEFAULT_BENCHMARKS = {"return": "LQR2", "rv_sqrt": "HARQ3"}
DEFAULT_N_OOS = 500


@dataclass
class BacktestReport:
    """Evaluation table, one row per (model, alpha, horizon), plus the forecasts behind it.

    ``dm_stat`` is positive when the model's mean tick loss exceeds the benchmark's.
    """

    table: pd.DataFrame
    forecasts: pd.DataFrame
    timings: Dict[str, float] = field(default_factory=dict)
    benchmark: Optional[str] = None

    def to_csv(self, out_dir) -> List[Path]:
        out_dir = Path(out_dir)
        forecasts = self.forecasts.copy()
        forecasts["date"] = pd.DatetimeIndex(forecasts["date"]).strftime("%Y-%m-%d")
        return [write_csv(self.table, out_dir / "report.csv"), write_csv(forecasts, out_dir / "forecasts.csv")]

    def to_json(self, path) -> Path:
        return write_json(
            {
                "benchmark": self.benchmark,
                "dm_sign": "positive dm_stat means the model's tick loss exceeds the benchmark's",
                "rows": self.table.to_dict(orient="records"),
            },
            path,
        )


class Backtest(object):
    """Rolling fixed-window forecasts of every stage, evaluated on the same targets.

    Stages are added with ``+=``. For horizon ``h`` the forecast origins are the
    last ``n_oos`` dates whose ``h``-day target is observed; the estimation rows
    of an origin ``t`` are those whose targets end at or before ``t``, at most
    ``window`` of them.

    Parameters
    ----------
    panel :
        Daily measures.
    returns :
        Daily returns, needed for ``target="return"``.
    target :
        ``"return"`` (h-day return) or ``"rv_sqrt"`` (square root of h-day RV).
    alphas, horizons :
        Quantile levels and forecast horizons.
    window :
        Estimation window; by default the longest window the data allow.
    n_oos :
        Number of out-of-sample forecasts per horizon.
    benchmark :
        Stage name the DM comparisons are made against.
    dq_lags, mc_reps :
        Dynamic quantile test settings.
    seed :
        Base seed; every stage, horizon and origin draws from its own stream.
    """

    def __init__(
        self,
        panel: MeasurePanel,
        returns: Optional[pd.Series] = None,
        target: str = "return",
        alphas: Sequence[float] = (0.05,),
        horizons: Sequence[int] = (1,),
        window: Optional[int] = None,
        n_oos: int = DEFAULT_N_OOS,
        benchmark: Optional[str] = None,
        dq_lags: int = DEFAULT_DQ_LAGS,
        mc_reps: int = DEFAULT_MC_REPS,
        seed: int = 0,
    ):
        if target not in DEFAULT_BENCHMARKS:
            raise ValueError(f"target must be 'return' or 'rv_sqrt', got {target!r}")
        if target == "return" and returns is None:
            raise ValueError("a return backtest needs the daily return series")
        self._pipeline: List[ForecastStage] = []
        self.panel = panel
        self.target = target
        if returns is not None:
            r = pd.Series(returns, dtype=float)
            r.index = pd.DatetimeIndex(r.index)
            returns = r.reindex(panel.dates)
        self.returns = returns
        self.alphas = [float(a) for a in alphas]
        self.horizons = sorted(int(h) for h in horizons)
        self.n_oos = int(n_oos)
        self.benchmark = benchmark
        self.dq_lags = dq_lags
        self.mc_reps = mc_reps
        self.seed = seed
        self._tictoc = Tictoc(output="log", additive=True)

        n, h_max = len(panel), self.horizons[-1]
        longest = n - 2 * h_max - self.n_oos + 1
        self.window = longest if window is None else int(window)
        if self.window < 50 or self.window > longest:
            raise InsufficientHistory(
                f"{n} days allow windows of at most {longest} for {self.n_oos} forecasts at horizon {h_max}, "
                f"got {self.window}"
            )

    def add(self, x):
        x.adding_to_pipeline(self)
        self._pipeline.append(x)

    def __iadd__(self, other):
        self.add(other)
        return self

    @property
    def stage_names(self) -> List[str]:
        return [p.name for p in self._pipeline]

    @property
    def series(self) -> pd.Series:
        return self.returns if self.target == "return" else self.panel["rv"].astype(float)

    def targets(self, h: int) -> pd.Series:
        return direct_targets(self.series, h, self.target)

    def origins(self, h: int) -> np.ndarray:
        n = len(self.panel)
        return np.arange(n - h - self.n_oos, n - h)

    def training_positions(self, t: int, h: int) -> np.ndarray:
        """Information dates whose h-day targets are complete by ``t``."""
        return np.arange(max(0, t - h - self.window + 1), t - h + 1)

    def run(self, progbar: bool = False) -> BacktestReport:
        if not self._pipeline:
            raise ValueError("no forecast stages added")
        names = self.stage_names
        if len(set(names)) != len(names):
            raise ValueError(f"stage names must be unique, got {names}")
        rows = []
        for i, stage in enumerate(self._pipeline):
            for h in self.horizons:
                logger.info("stage %d of %d: %s, horizon %d", i + 1, len(self._pipeline), stage.name, h)
                self.tic(stage.name, f"h={h}")
                origins = self.origins(h)
                q = stage.forecast(origins, h, self.alphas, progbar=progbar)
                self.toc()
                observed = self.targets(h).to_numpy()[origins]
                dates = self.panel.dates[origins]
                for a in self.alphas:
                    rows.append(
                        pd.DataFrame(
                            {
                                "date": dates,
                                "model": stage.name,
                                "alpha": a,
                                "horizon": h,
                                "q": q[a],
                                "observed": observed,
                            }
                        )
                    )
        forecasts = pd.concat(rows, ignore_index=True)
        self.tic("global", "evaluation")
        table = self.evaluate(forecasts)
        self.toc()
        return BacktestReport(table, forecasts, self._tictoc.summary(), self.benchmark)

    def evaluate(self, forecasts: pd.DataFrame) -> pd.DataFrame:
        """Coverage, tick loss, DQ (one-step only) and DM against the benchmark per cell."""
        out = []
        groups = dict(tuple(forecasts.groupby(["model", "alpha", "horizon"], sort=False)))
        for (model, a, h), cell in groups.items():
            obs, q = cell["observed"].to_numpy(), cell["q"].to_numpy()
            ok = np.isfinite(obs) & np.isfinite(q)
            if not ok.all():
                logger.warning("%s alpha=%s h=%d: %d forecasts missing", model, a, h, int((~ok).sum()))
            obs, q = obs[ok], q[ok]
            hs = hits(obs, q, a, horizon=h)
            loss = tick_loss_series(obs, q, a)
            row = {
                "model": model,
                "alpha": a,
                "horizon": h,
                "n": len(obs),
                "coverage": hs.coverage_hat,
                "coverage_se": coverage_std_error(a, len(obs)),
                "tick_loss": float(np.mean(loss)),
            }
            if h == 1:
                seed = stream_seed(self.seed, self.stage_names.index(model), int(round(a * 1e6)))
                try:
                    dq = dq_test(hs, self.dq_lags, self.mc_reps, seed=seed)
                except InsufficientHistory as e:
                    logger.warning("DQ %s alpha=%s: %s", model, a, e)
                else:
                    row.update(
                        dq_lr=dq.lr_stat,
                        dq_p_mc=dq.p_value_mc,
                        dq_p_asymptotic=dq.p_value_asymptotic,
                        dq_separation=dq.separation,
                    )
            if self.benchmark is not None:
                row.update(self._dm_columns(groups, model, a, h, cell, ok))
            out.append(row)
        return pd.DataFrame(out)

    def _dm_columns(self, groups, model, a, h, cell, ok):
        if model == self.benchmark:
            return {"dm_stat": np.nan, "dm_p": np.nan, "dm_note": "benchmark"}
        bench = groups.get((self.benchmark, a, h))
        if bench is None:
            return {"dm_stat": np.nan, "dm_p": np.nan, "dm_note": "no benchmark"}
        both = ok & np.isfinite(bench["q"].to_numpy())
        obs = cell["observed"].to_numpy()[both]
        loss_a = tick_loss_series(obs, cell["q"].to_numpy()[both], a)
        loss_b = tick_loss_series(obs, bench["q"].to_numpy()[both], a)
        try:
            dm = dm_test(loss_a, loss_b, horizon=h)
        except DegenerateVariance as e:
            logger.warning("DM %s vs %s alpha=%s h=%d: %s", model, self.benchmark, a, h, e)
            return {"dm_stat": np.nan, "dm_p": np.nan, "dm_note": "degenerate"}
        except SeriesTooShort as e:
            logger.warning("DM %s vs %s alpha=%s h=%d: %s", model, self.benchmark, a, h, e)
            return {"dm_stat": np.nan, "dm_p": np.nan, "dm_note": "too short"}
        return {"dm_stat": dm.stat, "dm_p": dm.p_value, "dm_note": ""}

    def timings(self) -> Dict[str, float]:
        return self._tictoc.summary()

    def tic(self, part, name):
        self._tictoc.tic(f"{part} / {name}")

    def toc(self):
        self._tictoc.toc()


class ForecastStage(object):
    """A forecaster added to a :class:`Backtest`.

    ``forecast`` returns one array of quantiles per alpha, aligned with ``origins``.
    """

    def __init__(self, name=None, refit_every: int = 1):
        self.name = type(self).__name__ if name is None else name
        if refit_every < 1:
            raise ValueError(f"refit_every must be >= 1, got {refit_every}")
        self.refit_every = refit_every

    def adding_to_pipeline(self, pipeline):
        self._pipeline = pipeline

    def forecast(self, origins, h, alphas, progbar=False) -> Dict[float, np.ndarray]:
        raise NotImplementedError()

    def tic(self, name):
        self._pipeline.tic(self.name, name)

    def toc(self):
        self._pipeline.toc()


class LinearQuantileForecaster(ForecastStage):
    """Direct h-step linear quantile regression of a named or custom model."""

    def __init__(self, spec: Union[str, ModelSpec], refit_every: int = 1, custom=None):
        spec = get_model(spec, custom) if isinstance(spec, str) else spec
        super(LinearQuantileForecaster, self).__init__(spec.name, refit_every)
        self.spec = spec

    def adding_to_pipeline(self, pipeline):
        super(LinearQuantileForecaster, self).adding_to_pipeline(pipeline)
        if self.spec.target != pipeline.target:
            raise ValueError(f"{self.spec.name} forecasts {self.spec.target}, the backtest target is {pipeline.target}")

    def forecast(self, origins, h, alphas, progbar=False):
        bt = self._pipeline
        built = build_dataset(bt.panel, self.spec.with_horizon(h), bt.returns)
        design = built.features[built.labels].to_numpy(dtype=float)
        out = {a: np.full(len(origins), np.nan) for a in alphas}
        betas = {}
        for i, t in enumerate(progress(origins, progbar=progbar)):
            if i % self.refit_every == 0:
                train = bt.training_positions(t, h)
                idx = np.flatnonzero((built.rows >= train[0]) & (built.rows <= train[-1]))
                data = built.dataset.take(idx)
                betas = {}
                for a in alphas:
                    try:
                        betas[a] = fit_lqr(data, a).beta
                    except NumericalError as e:
                        logger.warning("%s alpha=%s origin %s: %s", self.name, a, bt.panel.dates[t].date(), e)
            x = design[t]
            if not np.all(np.isfinite(x)):
                continue
            for a, beta in betas.items():
                out[a][i] = float(x @ beta)
        return out


class CaviarForecaster(ForecastStage):
    """CAViaR fitted to the h-day return over a rolling window of daily returns.

    The first fit uses ``n_draws`` random starts; later refits start from the
    previous estimate with ``warm_draws`` additional random starts.
    """

    def __init__(
        self,
        name: str,
        refit_every: int = 1,
        n_draws: int = 10_000,
        n_polish: int = 10,
        warm_draws: int = 0,
        exog_timing: str = "current",
    ):
        super(CaviarForecaster, self).__init__(name, refit_every)
        self.n_draws = n_draws
        self.n_polish = n_polish
        self.warm_draws = warm_draws
        self.exog_timing = exog_timing

    def adding_to_pipeline(self, pipeline):
        super(CaviarForecaster, self).adding_to_pipeline(pipeline)
        if pipeline.target != "return":
            raise ValueError("CAViaR forecasts return quantiles only")

    def forecast(self, origins, h, alphas, progbar=False):
        bt = self._pipeline
        r = bt.returns.to_numpy(dtype=float)
        out = {a: np.full(len(origins), np.nan) for a in alphas}
        stage = bt.stage_names.index(self.name)
        for a in alphas:
            spec = caviar.caviar_spec(self.name, a, h, self.exog_timing)
            exog_all = caviar.caviar_exog(bt.panel, spec)
            exog_all = None if exog_all is None else exog_all.to_numpy(dtype=float)
            fit = None
            for i, t in enumerate(progress(origins, progbar=progbar)):
                lo = max(0, t - bt.window + 1)
                window_r = r[lo : t + 1]  # noqa: E203
                window_x = None if exog_all is None else exog_all[lo : t + 1]  # noqa: E203
                if not np.all(np.isfinite(window_r)) or (window_x is not None and not np.all(np.isfinite(window_x))):
                    continue
                if fit is None or i % self.refit_every == 0:
                    seed = stream_seed(bt.seed, stage, h, int(round(a * 1e6)), t)
                    init = () if fit is None else (fit.params.vector,)
                    draws = self.n_draws if fit is None else self.warm_draws
                    try:
                        fit = caviar.fit_caviar(
                            spec, window_r, window_x, seed=seed, n_draws=draws, n_polish=self.n_polish, init=init
                        )
                    except NumericalError as e:
                        logger.warning("%s alpha=%s origin %s: %s", self.name, a, bt.panel.dates[t].date(), e)
                        if fit is None:
                            continue
                try:
                    out[a][i] = caviar.forecast_next(fit, window_r, window_x)
                except ExplosivePath as e:
                    logger.warning("%s alpha=%s origin %s: %s", self.name, a, bt.panel.dates[t].date(), e)
        return out


class ArfimaForecaster(ForecastStage):
    """Lognormal-normal mixture forecasts from an ARFIMA fit to log RV over the window."""

    def __init__(
        self,
        name: str = "ARFIMA",
        refit_every: int = 20,
        truncation: int = arfima.DEFAULT_TRUNCATION,
        n_draws: int = 10_000,
        estimate_ma: bool = False,
    ):
        super(ArfimaForecaster, self).__init__(name, refit_every)
        self.truncation = truncation
        self.n_draws = n_draws
        self.estimate_ma = estimate_ma

    def forecast(self, origins, h, alphas, progbar=False):
        bt = self._pipeline
        rv = bt.panel["rv"].astype(float).where(lambda s: s > 0).ffill().bfill()
        log_rv = np.log(rv.to_numpy())
        truncation = max(arfima.MIN_TRUNCATION, min(self.truncation, bt.window))
        stage = bt.stage_names.index(self.name)
        out = {a: np.full(len(origins), np.nan) for a in alphas}
        params = None
        for i, t in enumerate(progress(origins, progbar=progbar)):
            history = log_rv[max(0, t - bt.window + 1) : t + 1]  # noqa: E203
            if params is None or i % self.refit_every == 0:
                try:
                    params = arfima.fit_arfima(history, truncation, self.estimate_ma).params
                except NumericalError as e:
                    logger.warning("%s origin %s: %s", self.name, bt.panel.dates[t].date(), e)
                    if params is None:
                        continue
            fc = arfima.forecast_mixture(
                params, history, h, alphas, self.n_draws, stream_seed(bt.seed, stage, h, t), truncation
            )
            qs = fc.return_quantiles if bt.target == "return" else fc.rv_quantiles
            for a in alphas:
                out[a][i] = qs[a]
        return out


def rolling_forecast_eval(
    stages: Sequence[ForecastStage],
    panel: MeasurePanel,
    returns: Optional[pd.Series] = None,
    target: str = "return",
    alphas: Sequence[float] = (0.05,),
    horizons: Sequence[int] = (1,),
    window: Optional[int] = None,
    n_oos: int = DEFAULT_N_OOS,
    benchmark: Optional[str] = None,
    dq_lags: int = DEFAULT_DQ_LAGS,
    mc_reps: int = DEFAULT_MC_REPS,
    seed: int = 0,
    progbar: bool = False,
) -> BacktestReport:
    """Run ``stages`` through a :class:`Backtest` and return its report."""
    bt = Backtest(panel, returns, target, alphas, horizons, window, n_oos, benchmark, dq_lags, mc_reps, seed)
    for s in stages:
        bt += s
    if benchmark is not None and benchmark not in bt.stage_names:
        logger.warning("benchmark %s is not among the stages %s; DM columns will be empty", benchmark, bt.stage_names)
    return bt.run(progbar=progbar)


def in_sample_report(
    panel: MeasurePanel,
    returns: Optional[pd.Series],
    models: Sequence[Union[str, ModelSpec]],
    alphas: Sequence[float],
    dq_lags: int = DEFAULT_DQ_LAGS,
    mc_reps: int = DEFAULT_MC_REPS,
    seed: int = 0,
    caviar_draws: int = 10_000,
    custom: Optional[Dict[str, ModelSpec]] = None,
) -> pd.DataFrame:
    """Coverage and DQ test of one-step full-sample fits.

    Names found in :data:`quanteasy.caviar.CAVIAR_SPECS` are fitted as CAViaR,
    everything else as a linear quantile model.
    """
    rows = []
    for m, model in enumerate(models):
        for a in alphas:
            if isinstance(model, str) and model.upper() in caviar.CAVIAR_SPECS:
                spec = caviar.caviar_spec(model, a)
                _, r, x = caviar.caviar_inputs(panel, returns, spec)
                fit = caviar.fit_caviar(spec, r, x, seed=stream_seed(seed, m), n_draws=caviar_draws)
                obs, q, name = r[1:], fit.q_path[1:], spec.name
            else:
                spec = get_model(model, custom) if isinstance(model, str) else model
                built = build_dataset(panel, spec.with_horizon(1), returns)
                fit = fit_lqr(built.dataset, a)
                obs, q, name = built.dataset.y, built.dataset.x @ fit.beta, spec.name
            hs = hits(obs, q, a)
            dq = dq_test(hs, dq_lags, mc_reps, seed=stream_seed(seed, m, int(round(a * 1e6))))
            rows.append(
                {
                    "model": name,
                    "alpha": a,
                    "n": len(obs),
                    "coverage": hs.coverage_hat,
                    "tick_loss": float(np.mean(tick_loss_series(obs, q, a))),
                    "dq_lr": dq.lr_stat,
                    "dq_p_mc": dq.p_value_mc,
                    "dq_p_asymptotic": dq.p_value_asymptotic,
                    "dq_separation": dq.separation,
                }
            )
    return pd.DataFrame(rows)
