# -*- coding: utf-8 -*-

"""Conditional autoregressive quantile (CAViaR) models.

The quantile path follows

    q[t] = b1 + b2 * q[t-1] + b3 * |r[t-1]| + g' x[t-1]             (SAV)
    q[t] = b1 + b2 * q[t-1] + b3 * r+[t-1] + b4 * r-[t-1] + g' x[t-1]   (AS)

with ``r+ = max(r, 0)`` and ``r- = max(-r, 0)``. ``q[t]`` is the quantile of the
h-period return ``r[t] + ... + r[t+h-1]`` given information up to ``t-1``.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import AllStartsFailed, ConfigError, ExplosivePath, NoStableRegion
from .measures import MeasurePanel
from .models import Term
from .qr import check_loss

logger = logging.getLogger(__name__)

__all__ = [
    "CaviarSpec",
    "CaviarParams",
    "CaviarFit",
    "CAVIAR_SPECS",
    "caviar_spec",
    "caviar_exog",
    "caviar_inputs",
    "caviar_targets",
    "evaluate_quantile_path",
    "fit_caviar",
    "caviar_std_errors",
    "forecast_next",
]

OVERFLOW = 1e10
_PENALTY = 1e10

CAVIAR_SPECS = {
    "SAV": ("SAV", ()),
    "AS": ("AS", ()),
    "RSAV1": ("SAV", ("rv",)),
    "RSAV2": ("SAV", ("iv", "jv", "impvol")),
    "RAS": ("AS", ("rs_plus", "rs_minus", "impvol")),
}


@dataclass(frozen=True)
class CaviarSpec:
    """Form (``SAV`` or ``AS``), exogenous regressors and quantile level.

    ``exog_timing="current"`` lets ``x[t-1]`` enter ``q[t]``; ``"lagged"`` uses ``x[t-2]``.
    """

    form: str
    alpha: float
    exogenous: Tuple[str, ...] = ()
    horizon: int = 1
    exog_timing: str = "current"
    name: Optional[str] = None

    def __post_init__(self):
        if self.form not in ("SAV", "AS"):
            raise ConfigError(f"CAViaR form must be SAV or AS, got {self.form!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.exog_timing not in ("current", "lagged"):
            raise ConfigError(f"exog_timing must be 'current' or 'lagged', got {self.exog_timing!r}")
        object.__setattr__(self, "exogenous", tuple(str(Term.parse(e)) for e in self.exogenous))
        if self.name is None:
            name = self.form if not self.exogenous else f"{self.form}+{'+'.join(self.exogenous)}"
            object.__setattr__(self, "name", name)

    @property
    def beta_labels(self) -> List[str]:
        return ["b1", "b2", "b3"] if self.form == "SAV" else ["b1", "b2", "b3", "b4"]

    @property
    def labels(self) -> List[str]:
        return self.beta_labels + [Term.parse(e).label for e in self.exogenous]

    @property
    def n_params(self) -> int:
        return len(self.labels)


def caviar_spec(name: str, alpha: float, horizon: int = 1, exog_timing: str = "current") -> CaviarSpec:
    key = name.upper()
    if key not in CAVIAR_SPECS:
        raise ConfigError(f"unknown CAViaR model {name!r}; available: {', '.join(CAVIAR_SPECS)}")
    form, exog = CAVIAR_SPECS[key]
    return CaviarSpec(form, alpha, exog, horizon, exog_timing, name=key)


@dataclass
class CaviarParams:
    beta: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise ValueError("CAViaR parameters must be finite")

    @classmethod
    def from_vector(cls, spec: CaviarSpec, theta):
        k = len(spec.beta_labels)
        return cls(theta[:k], theta[k:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])


@dataclass
class CaviarFit:
    spec: CaviarSpec
    params: CaviarParams
    objective: float
    q_path: np.ndarray
    q0: float
    seed: int = 0
    n_draws: int = 0
    start_objectives: List[float] = field(default_factory=list)
    q0_sensitivity: float = 0.0
    flat_regressors: List[str] = field(default_factory=list)
    std_errors: Optional[pd.DataFrame] = None
    bandwidth: Optional[float] = None

    @property
    def labels(self):
        return self.spec.labels

    def to_dict(self):
        out = {
            "model": self.spec.name,
            "form": self.spec.form,
            "alpha": self.spec.alpha,
            "horizon": self.spec.horizon,
            "exog_timing": self.spec.exog_timing,
            "labels": self.labels,
            "params": self.params.vector,
            "objective": self.objective,
            "q0": self.q0,
            "q0_sensitivity": self.q0_sensitivity,
            "seed": self.seed,
            "n_draws": self.n_draws,
            "start_objectives": self.start_objectives,
            "flat_regressors": self.flat_regressors,
            "bandwidth": self.bandwidth,
        }
        if self.std_errors is not None:
            out["bandwidth_table"] = self.std_errors.reset_index().to_dict(orient="list")
            if self.bandwidth is not None:
                out["std_errors"] = self.std_errors.loc[self.bandwidth].to_numpy()
        return out


def caviar_exog(panel: MeasurePanel, spec: CaviarSpec) -> Optional[pd.DataFrame]:
    """Exogenous regressors of ``spec`` on the panel dates."""
    if not spec.exogenous:
        return None
    terms = [Term.parse(e) for e in spec.exogenous]
    return pd.DataFrame({t.label: t.values(panel) for t in terms}, index=panel.dates)


def caviar_inputs(panel: MeasurePanel, returns, spec: CaviarSpec):
    """Returns and exogenous regressors on the panel dates, rows with a missing value removed.

    Returns ``(dates, r, x)`` with ``x`` None for models without exogenous regressors.
    """
    r = pd.Series(returns, dtype=float)
    r.index = pd.DatetimeIndex(r.index)
    frame = r.reindex(panel.dates).to_frame("return")
    exog = caviar_exog(panel, spec)
    if exog is not None:
        frame = pd.concat([frame, exog], axis=1)
    frame = frame.dropna()
    x = None if exog is None else frame[exog.columns].to_numpy(dtype=float)
    return frame.index, frame["return"].to_numpy(dtype=float), x


def caviar_targets(returns, horizon: int = 1) -> np.ndarray:
    """``y[t] = r[t] + ... + r[t+h-1]``, NaN where the window runs past the end."""
    r = pd.Series(np.asarray(returns, dtype=float))
    return r.rolling(horizon, min_periods=horizon).sum().shift(-(horizon - 1)).to_numpy()


def _drivers(spec: CaviarSpec, returns, exog) -> np.ndarray:
    r = np.asarray(returns, dtype=float)
    cols = [np.abs(r)] if spec.form == "SAV" else [np.maximum(r, 0.0), np.maximum(-r, 0.0)]
    if spec.exogenous:
        if exog is None:
            raise ConfigError(f"{spec.name} needs exogenous regressors {spec.exogenous}")
        x = np.asarray(exog, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        if x.shape != (len(r), len(spec.exogenous)):
            raise ValueError(f"exog has shape {x.shape}, expected {(len(r), len(spec.exogenous))}")
        if spec.exog_timing == "lagged":
            x = np.vstack([x[:1], x[:-1]])
        cols.extend(x.T)
    return np.column_stack(cols)


def _path(theta, drivers, q0):
    c = theta[0] + drivers[:-1] @ theta[2:]
    q = np.empty(len(drivers))
    q[0] = q0
    with np.errstate(over="ignore", invalid="ignore"):
        q[1:] = lfilter([1.0], [1.0, -theta[1]], c, zi=[theta[1] * q0])[0]
    if not np.all(np.isfinite(q)) or np.max(np.abs(q)) > OVERFLOW:
        raise ExplosivePath("quantile path exceeds the overflow guard")
    return q


def _loss(y, q, alpha, horizon):
    end = len(y) - horizon + 1
    return float(np.mean(check_loss(y[1:end] - q[1:end], alpha)))


def evaluate_quantile_path(spec: CaviarSpec, params, returns, exog=None, q0: float = 0.0):
    """Run the recursion from ``q0`` and return ``(q_path, objective)``.

    The objective is the mean check loss over ``t = 1 .. n - h``.
    """
    theta = params.vector if isinstance(params, CaviarParams) else np.asarray(params, dtype=float)
    if len(theta) != spec.n_params:
        raise ValueError(f"{spec.name} takes {spec.n_params} parameters, got {len(theta)}")
    drivers = _drivers(spec, returns, exog)
    q = _path(theta, drivers, q0)
    y = caviar_targets(returns, spec.horizon)
    return q, _loss(y, q, spec.alpha, spec.horizon)


def _initial_quantile(y, alpha, horizon):
    y = y[: len(y) - horizon + 1]
    head = y[: max(1, int(math.ceil(0.1 * len(y))))]
    return float(np.quantile(head, alpha))


def fit_caviar(
    spec: CaviarSpec,
    returns,
    exog=None,
    seed: int = 0,
    n_draws: int = 10_000,
    n_polish: int = 10,
    q0: Optional[float] = None,
    init: Sequence = (),
    max_rounds: int = 3,
) -> CaviarFit:
    """Multi-start minimisation of the check loss along the recursion.

    Parameters
    ----------
    spec :
        Model form and quantile level.
    returns :
        Daily returns (percent).
    exog :
        ``n x k`` exogenous regressors aligned with ``returns``.
    seed :
        Seed of the random starting values.
    n_draws :
        Random parameter vectors evaluated; coefficients uniform on [-1, 1] and the
        autoregressive coefficient on [0, 1].
    n_polish :
        Best draws refined with Nelder-Mead followed by BFGS.
    q0 :
        Initial quantile; defaults to the empirical quantile of the first 10% of targets.
    init :
        Extra starting vectors that are always polished, e.g. a previous estimate.
    """
    r = np.asarray(returns, dtype=float)
    n = len(r)
    if n < 300:
        logger.warning("%s: %d observations, estimates are unreliable below 300", spec.name, n)
    drivers = _drivers(spec, r, exog)
    y = caviar_targets(r, spec.horizon)
    if q0 is None:
        q0 = _initial_quantile(y, spec.alpha, spec.horizon)

    def objective(theta):
        try:
            return _loss(y, _path(theta, drivers, q0), spec.alpha, spec.horizon)
        except ExplosivePath:
            return _PENALTY

    rng = np.random.default_rng(seed)
    draws = rng.uniform(-1.0, 1.0, size=(n_draws, spec.n_params))
    draws[:, 1] = rng.uniform(0.0, 1.0, size=n_draws)
    values = np.array([objective(th) for th in draws])
    ok = values < _PENALTY
    if not np.any(ok) and not len(init):
        raise AllStartsFailed(f"{spec.name}: every random start produced an explosive path")
    order = np.argsort(np.where(ok, values, np.inf), kind="mergesort")[: min(n_polish, int(ok.sum()))]
    starts = [np.asarray(th, dtype=float) for th in init] + [draws[i] for i in order]

    polished = []
    for theta in starts:
        best, f_best = theta, objective(theta)
        for _ in range(max_rounds):
            options = {"maxiter": 500, "xatol": 1e-8, "fatol": 1e-12}
            res = minimize(objective, best, method="Nelder-Mead", options=options)
            cand = res.x
            if res.fun < _PENALTY:
                qn = minimize(objective, cand, method="BFGS", options={"maxiter": 200})
                if qn.fun <= res.fun:
                    cand = qn.x
            f_cand = objective(cand)
            improvement = f_best - f_cand
            if f_cand < f_best:
                best, f_best = cand, f_cand
            if improvement <= 1e-10:
                break
        polished.append((f_best, best))
    polished = [(f, th) for f, th in polished if f < _PENALTY and np.all(np.isfinite(th))]
    if not polished:
        raise AllStartsFailed(f"{spec.name}: no polished start converged to a finite objective")
    f_best, theta = min(polished, key=lambda p: p[0])

    q_path = _path(theta, drivers, q0)
    fit = CaviarFit(
        spec=spec,
        params=CaviarParams.from_vector(spec, theta),
        objective=_loss(y, q_path, spec.alpha, spec.horizon),
        q_path=q_path,
        q0=q0,
        seed=seed,
        n_draws=n_draws,
        start_objectives=[f for f, _ in polished],
    )
    q0_alt = float(np.quantile(y[: n - spec.horizon + 1], spec.alpha))
    fit.q0_sensitivity = _objective_at_q0(theta, drivers, y, spec, q0_alt) - fit.objective
    fit.flat_regressors = _flat_regressors(spec, theta, objective, drivers)
    if fit.flat_regressors:
        logger.warning("%s: objective is flat in %s, coefficients unidentified", spec.name, fit.flat_regressors)
    return fit


def _objective_at_q0(theta, drivers, y, spec, q0):
    try:
        return _loss(y, _path(theta, drivers, q0), spec.alpha, spec.horizon)
    except ExplosivePath:
        return np.inf


def _flat_regressors(spec, theta, objective, drivers):
    k = len(spec.beta_labels)
    labels = spec.labels
    f0 = objective(theta)
    flat = []
    for j in range(k, len(theta)):
        col = drivers[:-1, j - 2]
        if np.all(col == 0):
            flat.append(labels[j])
            continue
        step = 0.1 * max(1.0, abs(theta[j]))
        moved = [objective(np.where(np.arange(len(theta)) == j, theta[j] + s, theta)) for s in (-step, step)]
        if max(abs(m - f0) for m in moved) <= 1e-10 * max(f0, 1e-12):
            flat.append(labels[j])
    return flat


def _path_gradient(theta, drivers, q):
    g = np.column_stack([np.ones(len(q) - 1), q[:-1], drivers[:-1]])
    grad = np.zeros((len(q), len(theta)))
    grad[1:] = lfilter([1.0], [1.0, -theta[1]], g, axis=0)
    return grad


def caviar_std_errors(fit: CaviarFit, returns, exog=None, bandwidth_grid=None, tolerance: float = 0.10) -> CaviarFit:
    """Sandwich standard errors over a grid of kernel bandwidths.

    The selected bandwidth is the midpoint of the widest run of consecutive grid
    points over which every standard error varies by less than ``tolerance``.
    The table and the selection are stored on ``fit`` which is also returned.
    """
    spec = fit.spec
    drivers = _drivers(spec, returns, exog)
    y = caviar_targets(returns, spec.horizon)
    theta = fit.params.vector
    q = fit.q_path
    end = len(y) - spec.horizon + 1
    grad = _path_gradient(theta, drivers, q)[1:end]
    e = y[1:end] - q[1:end]
    t_obs = len(e)
    if bandwidth_grid is None:
        bandwidth_grid = np.std(e) * np.geomspace(0.05, 1.0, 15)
    bandwidth_grid = np.sort(np.asarray(bandwidth_grid, dtype=float))
    a_mat = spec.alpha * (1 - spec.alpha) * grad.T @ grad / t_obs

    rows = []
    for c in bandwidth_grid:
        inside = np.abs(e) < c
        d_mat = (grad[inside].T @ grad[inside]) / (2.0 * c * t_obs)
        try:
            d_inv = np.linalg.inv(d_mat)
            cov = d_inv @ a_mat @ d_inv / t_obs
            se = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
        except np.linalg.LinAlgError:
            se = np.full(len(theta), np.nan)
        rows.append(se)
    table = pd.DataFrame(rows, index=pd.Index(bandwidth_grid, name="bandwidth"), columns=spec.labels)
    fit.std_errors = table
    fit.bandwidth = _stable_bandwidth(table, tolerance)
    return fit


def _stable_bandwidth(table: pd.DataFrame, tolerance: float) -> float:
    se = table.to_numpy()
    grid = table.index.to_numpy()
    finite = np.all(np.isfinite(se) & (se > 0), axis=1)
    if len(grid) == 1 and finite[0]:
        return float(grid[0])
    best = None
    for i in range(len(grid)):
        if not finite[i]:
            continue
        j = i
        while j + 1 < len(grid) and finite[j + 1]:
            block = se[i : j + 2]  # noqa: E203
            if np.any(block.max(axis=0) / block.min(axis=0) - 1.0 >= tolerance):
                break
            j += 1
        if j > i and (best is None or j - i > best[1] - best[0]):
            best = (i, j)
    if best is None:
        raise NoStableRegion("standard errors do not stabilise over the bandwidth grid", table=table)
    return float(grid[(best[0] + best[1]) // 2])


def forecast_next(fit: CaviarFit, returns, exog=None) -> float:
    """Quantile for the period after the last observation of ``returns``."""
    theta = fit.params.vector
    drivers = _drivers(fit.spec, returns, exog)
    q = _path(theta, drivers, fit.q0)
    nxt = theta[0] + theta[1] * q[-1] + drivers[-1] @ theta[2:]
    if not np.isfinite(nxt) or abs(nxt) > OVERFLOW:
        raise ExplosivePath("forecast exceeds the overflow guard")
    return float(nxt)
