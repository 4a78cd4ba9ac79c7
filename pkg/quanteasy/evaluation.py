# -*- coding: utf-8 -*-

"""Backtesting quantile forecasts: hits, the dynamic quantile test, tick loss and DM comparisons."""
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
import statsmodels.api as sm
import statsmodels.stats.sandwich_covariance as sw
from scipy import linalg, stats
from statsmodels.tools import sm_exceptions

from .errors import (
    DegenerateVariance,
    InsufficientHistory,
    LengthMismatch,
    MultiStepRefused,
    SeparationDetected,
    SeriesTooShort,
)
from .util import progress

logger = logging.getLogger(__name__)

__all__ = [
    "HitSeries",
    "DQResult",
    "DMResult",
    "hits",
    "coverage_std_error",
    "dq_design",
    "dq_null_distribution",
    "dq_test",
    "tick_loss_series",
    "dm_test",
]

DEFAULT_DQ_LAGS = 5
DEFAULT_MC_REPS = 9999
RIDGE_PENALTY = 1e-6

_FIT_WARNINGS = tuple(
    w
    for w in (
        getattr(sm_exceptions, "PerfectSeparationWarning", None),
        sm_exceptions.ConvergenceWarning,
        sm_exceptions.HessianInversionWarning,
    )
    if w is not None
)


def _aligned(observed, quantile_path):
    obs = np.asarray(observed, dtype=float)
    q = np.asarray(quantile_path, dtype=float)
    if obs.shape != q.shape:
        raise LengthMismatch(f"observed has {obs.size} values, quantile path has {q.size}")
    return obs, q


@dataclass
class HitSeries:
    alpha: float
    hits: np.ndarray
    quantile_path: np.ndarray
    horizon: int = 1
    index: Optional[pd.Index] = None

    def __post_init__(self):
        self.hits = np.asarray(self.hits, dtype=bool)
        self.quantile_path = np.asarray(self.quantile_path, dtype=float)
        if self.hits.shape != self.quantile_path.shape:
            raise LengthMismatch(f"{self.hits.size} hits for a quantile path of {self.quantile_path.size}")

    def __len__(self):
        return len(self.hits)

    @property
    def coverage_hat(self) -> float:
        return float(self.hits.mean()) if len(self.hits) else np.nan


def hits(observed, quantile_path, alpha: float, horizon: int = 1) -> HitSeries:
    """Indicator of ``observed <= quantile``; ties count as hits."""
    obs, q = _aligned(observed, quantile_path)
    index = observed.index if isinstance(observed, pd.Series) else None
    return HitSeries(alpha, obs <= q, q, horizon, index)


def coverage_std_error(alpha: float, n: int) -> float:
    """Binomial standard error of the empirical coverage under correct calibration."""
    return float(np.sqrt(alpha * (1.0 - alpha) / n))


def dq_design(hit, path, n_lags: int = DEFAULT_DQ_LAGS):
    """Response and regressors of the hit logit.

    Row ``t`` regresses ``hit[t]`` on a constant, ``hit[t-1..t-n_lags]`` and
    ``q[t..t-n_lags+1]`` (the forecast for ``t`` and its ``n_lags-1`` predecessors).
    """
    hit = np.asarray(hit, dtype=float)
    q = np.asarray(path, dtype=float)
    n = len(hit)
    rows = np.arange(n_lags, n)
    lagged_hits = np.column_stack([hit[rows - k] for k in range(1, n_lags + 1)])
    lagged_q = np.column_stack([q[rows - k] for k in range(0, n_lags)])
    x = np.column_stack([np.ones(len(rows)), lagged_hits, lagged_q])
    return hit[rows], x


def _independent_columns(x, tol=1e-9):
    """Indices of a maximal set of linearly independent columns; the constant is always kept."""
    scale = np.linalg.norm(x, axis=0)
    scale[scale == 0] = 1.0
    _, r, piv = linalg.qr(x / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * diag[0])) if len(diag) else 0
    keep = sorted(piv[:rank])
    if 0 not in keep:
        keep = sorted([0] + keep[: rank - 1])
    return keep


def _bernoulli_loglik(y, eta):
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _logit_loglik(y, x):
    """Maximized logit log-likelihood and whether the ridge fallback was needed."""
    if y.min() == y.max():
        # all hits or no hits: the likelihood is maximized at the boundary
        return 0.0, True
    separated = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            res = sm.Logit(y, x).fit(method="newton", disp=0, maxiter=100)
            params = res.params
            converged = bool(res.mle_retvals.get("converged", True))
        except (np.linalg.LinAlgError, getattr(sm_exceptions, "PerfectSeparationError", ValueError), ValueError):
            params, converged = None, False
    if any(issubclass(w.category, _FIT_WARNINGS) for w in caught):
        separated = True
    if params is None or not converged or separated or not np.all(np.isfinite(params)):
        glm = sm.GLM(y, x, family=sm.families.Binomial())
        params = glm.fit_regularized(alpha=RIDGE_PENALTY, L1_wt=0.0).params
        separated = True
    return _bernoulli_loglik(y, x @ np.asarray(params)), separated


def _lr_stat(y, x, alpha):
    n1 = y.sum()
    restricted = n1 * np.log(alpha) + (len(y) - n1) * np.log(1.0 - alpha)
    unrestricted, separated = _logit_loglik(y, x)
    return max(0.0, 2.0 * (unrestricted - restricted)), separated


@dataclass
class DQResult:
    lr_stat: float
    p_value_mc: float
    p_value_asymptotic: float
    coverage_hat: float
    lags: int
    df: int
    n: int
    mc_reps: int
    separation: bool = False
    dropped_columns: List[str] = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def _column_labels(n_lags):
    hit_lags = [f"hit[t-{k}]" for k in range(1, n_lags + 1)]
    return ["const"] + hit_lags + ["q[t]"] + [f"q[t-{k}]" for k in range(1, n_lags)]


def _check_dq_input(n, alpha, n_lags, horizon):
    if horizon != 1:
        raise MultiStepRefused(
            f"the dynamic quantile test is only valid for one-step forecasts, got horizon {horizon}"
        )
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n_lags < 1:
        raise ValueError(f"n_lags must be >= 1, got {n_lags}")
    if n <= 10 * (2 * n_lags + 1):
        raise InsufficientHistory(f"{n} hits; the DQ test with {n_lags} lags needs more than {10 * (2 * n_lags + 1)}")


def dq_null_distribution(
    path, alpha: float, n_lags: int = DEFAULT_DQ_LAGS, mc_reps: int = DEFAULT_MC_REPS, seed=0, progbar: bool = False
) -> np.ndarray:
    """LR statistics of ``mc_reps`` iid Bernoulli(alpha) hit series regressed on the fixed ``path``."""
    q = np.asarray(path, dtype=float)
    _check_dq_input(len(q), alpha, n_lags, 1)
    rng = np.random.default_rng(seed)
    draws = rng.random((mc_reps, len(q))) < alpha
    out = np.empty(mc_reps)
    for b in progress(range(mc_reps), progbar=progbar):
        y, x = dq_design(draws[b], q, n_lags)
        out[b] = _lr_stat(y, x[:, _independent_columns(x)], alpha)[0]
    return out


def dq_test(
    hit_series: HitSeries,
    n_lags: int = DEFAULT_DQ_LAGS,
    mc_reps: int = DEFAULT_MC_REPS,
    seed=0,
    null_draws: Optional[np.ndarray] = None,
    progbar: bool = False,
) -> DQResult:
    """Dynamic quantile test of correct conditional coverage.

    The LR statistic compares the fitted hit logit with the null of constant
    hit probability ``alpha``. The Monte Carlo p-value is
    ``(1 + #{LR_b >= LR}) / (mc_reps + 1)`` over iid Bernoulli(alpha) hit series
    on the same quantile path; ``null_draws`` reuses a precomputed null.
    """
    hs = hit_series
    _check_dq_input(len(hs), hs.alpha, n_lags, hs.horizon)
    y, x = dq_design(hs.hits, hs.quantile_path, n_lags)
    keep = _independent_columns(x)
    labels = _column_labels(n_lags)
    dropped = [labels[j] for j in range(x.shape[1]) if j not in keep]
    if dropped:
        logger.info("DQ regressors dropped as collinear: %s", dropped)
    lr, separated = _lr_stat(y, x[:, keep], hs.alpha)
    if separated:
        warnings.warn(SeparationDetected("hit logit is separated; LR computed from the ridge-penalized fit"))
        logger.warning("perfect separation in the hit logit (alpha=%s); ridge fallback used", hs.alpha)
    if null_draws is None:
        null_draws = dq_null_distribution(hs.quantile_path, hs.alpha, n_lags, mc_reps, seed, progbar)
    null_draws = np.asarray(null_draws, dtype=float)
    p_mc = (1.0 + np.sum(null_draws >= lr)) / (len(null_draws) + 1.0)
    df = len(keep)
    return DQResult(
        lr_stat=lr,
        p_value_mc=float(p_mc),
        p_value_asymptotic=float(stats.chi2.sf(lr, df)),
        coverage_hat=hs.coverage_hat,
        lags=n_lags,
        df=df,
        n=len(y),
        mc_reps=len(null_draws),
        separation=separated,
        dropped_columns=dropped,
    )


def tick_loss_series(observed, quantile_path, alpha: float):
    """Per-period check loss of the forecast error ``observed - quantile``."""
    obs, q = _aligned(observed, quantile_path)
    e = obs - q
    loss = (alpha - (e < 0)) * e
    if isinstance(observed, pd.Series):
        return pd.Series(loss, index=observed.index, name="tick_loss")
    return loss


@dataclass
class DMResult:
    stat: float
    p_value: float
    mean_loss_a: float
    mean_loss_b: float
    nw_lags: int
    n: int

    def to_dict(self):
        return dict(self.__dict__)


def dm_test(loss_a, loss_b, horizon: int = 1, nw_lags: Optional[int] = None) -> DMResult:
    """Diebold-Mariano test of equal expected loss.

    The variance of the mean loss differential is the Newey-West estimate with
    ``horizon - 1`` lags unless ``nw_lags`` is given. Positive statistics mean
    ``loss_a`` is larger on average.
    """
    a, b = _aligned(loss_a, loss_b)
    d = a - b
    n = len(d)
    if n < 30:
        raise SeriesTooShort(f"the DM test needs at least 30 loss pairs, got {n}")
    if np.all(d == 0):
        raise DegenerateVariance("the loss differential is identically zero")
    lags = horizon - 1 if nw_lags is None else nw_lags
    res = sm.OLS(d, np.ones((n, 1))).fit()
    var = float(sw.cov_hac_simple(res, nlags=lags, use_correction=False)[0, 0])
    if not var > 0:
        raise DegenerateVariance(f"Newey-West variance of the loss differential is {var}")
    stat = float(np.mean(d) / np.sqrt(var))
    return DMResult(
        stat=stat,
        p_value=float(2.0 * stats.norm.sf(abs(stat))),
        mean_loss_a=float(a.mean()),
        mean_loss_b=float(b.mean()),
        nw_lags=lags,
        n=n,
    )
