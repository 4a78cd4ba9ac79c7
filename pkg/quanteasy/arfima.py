# -*- coding: utf-8 -*-

"""Lognormal-normal mixture: ARFIMA(1,d,0) for log RV, conditionally Gaussian returns.

Log realized variance ``x[t]`` follows

    (1 - phi L)(1 - L)^d (x[t] - mu) = (1 - psi L) u[t],    u[t] ~ N(0, sigma_u2)

and the daily return is ``r[t] = RV[t]^(1/2) * eps[t]`` with standard normal
``eps``. The h-day return is therefore normal given the realized variances,
with variance ``RV[t+1] + ... + RV[t+h]``.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.optimize import brentq, minimize
from scipy.signal import fftconvolve, lfilter
from statsmodels.tools.numdiff import approx_hess3

from .errors import NonFiniteLikelihood, OptimizerDivergence, RootBracketFailure

logger = logging.getLogger(__name__)

__all__ = [
    "ArfimaParams",
    "ArfimaFit",
    "MixtureForecast",
    "frac_diff_weights",
    "arfima_loglik",
    "fit_arfima",
    "simulate_arfima",
    "mixture_cdf",
    "forecast_mixture",
    "forecast_mixture_horizons",
]

DEFAULT_TRUNCATION = 1000
MIN_TRUNCATION = 100
_D_BOUND = 0.499
_PHI_BOUND = 0.995


def frac_diff_weights(d: float, k_max: int) -> np.ndarray:
    """Coefficients of the expansion of ``(1 - L)^d`` up to lag ``k_max``."""
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    k = np.arange(1, k_max + 1, dtype=float)
    return np.concatenate([[1.0], np.cumprod((k - 1.0 - d) / k)])


@dataclass(frozen=True)
class ArfimaParams:
    mu: float
    phi: float
    d: float
    sigma_u2: float
    ma_psi: float = 0.0

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ValueError(f"phi must satisfy |phi| < 1, got {self.phi}")
        if not -0.5 < self.d < 0.5:
            raise ValueError(f"d must be in (-0.5, 0.5), got {self.d}")
        if not self.sigma_u2 > 0:
            raise ValueError(f"sigma_u2 must be positive, got {self.sigma_u2}")
        if not abs(self.ma_psi) < 1:
            raise ValueError(f"ma_psi must satisfy |ma_psi| < 1, got {self.ma_psi}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.mu, self.phi, self.d, self.sigma_u2, self.ma_psi])

    def to_dict(self):
        return {"mu": self.mu, "phi": self.phi, "d": self.d, "sigma_u2": self.sigma_u2, "ma_psi": self.ma_psi}


def _check_truncation(truncation):
    if truncation < MIN_TRUNCATION:
        raise ValueError(f"truncation must be >= {MIN_TRUNCATION}, got {truncation}")


def _n_lags(truncation: int, n_past: int) -> int:
    """Lags of the fractional filter for a value with ``n_past`` observed predecessors."""
    return max(0, min(truncation, n_past))


def _residuals(params: ArfimaParams, x, truncation):
    """Fractionally differenced series ``e`` and innovations ``u``; pre-sample values sit at ``mu``."""
    xt = np.asarray(x, dtype=float) - params.mu
    # the last in-sample value has len - 1 predecessors
    w = frac_diff_weights(params.d, _n_lags(truncation, len(xt) - 1))
    e = fftconvolve(xt, w)[: len(xt)]
    v = lfilter([1.0, -params.phi], [1.0], e)
    u = lfilter([1.0], [1.0, -params.ma_psi], v) if params.ma_psi else v
    return e, u


def arfima_loglik(params: ArfimaParams, x, truncation: int = DEFAULT_TRUNCATION) -> float:
    """Gaussian conditional-sum-of-squares log-likelihood of the log-RV series."""
    _check_truncation(truncation)
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two observations")
    _, u = _residuals(params, x, truncation)
    n = len(u)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        ll = -0.5 * n * np.log(2.0 * np.pi * params.sigma_u2) - 0.5 * np.sum(u ** 2) / params.sigma_u2
    if not np.isfinite(ll):
        raise NonFiniteLikelihood(f"log-likelihood is not finite at {params}")
    return float(ll)


@dataclass
class ArfimaFit:
    params: ArfimaParams
    loglik: float
    aic: float
    n: int
    truncation: int
    labels: list
    std_errors: np.ndarray
    tstats: np.ndarray
    estimate_ma: bool = False
    starts: list = field(default_factory=list)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "labels": self.labels,
            "std_errors": self.std_errors,
            "tstats": self.tstats,
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n,
            "truncation": self.truncation,
            "estimate_ma": self.estimate_ma,
        }

    def coefficient_table(self) -> pd.DataFrame:
        values = [getattr(self.params, k) for k in self.labels]
        return pd.DataFrame(
            {"estimate": values, "std_error": self.std_errors, "tstat": self.tstats}, index=self.labels
        )


def _concentrated(theta, x, truncation, estimate_ma):
    """Parameters with ``sigma_u2`` profiled out and the matching innovations."""
    mu, phi, d = theta[:3]
    psi = theta[3] if estimate_ma else 0.0
    trial = ArfimaParams(mu, phi, d, 1.0, psi)
    _, u = _residuals(trial, x, truncation)
    return ArfimaParams(mu, phi, d, max(float(np.mean(u ** 2)), 1e-300), psi)


def fit_arfima(x, truncation: int = DEFAULT_TRUNCATION, estimate_ma: bool = False) -> ArfimaFit:
    """Maximum likelihood over ``(mu, phi, d, sigma_u2)``, plus ``ma_psi`` when ``estimate_ma``.

    ``sigma_u2`` is concentrated out during the search; the standard errors
    come from the numerical Hessian of the full log-likelihood.
    """
    _check_truncation(truncation)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    n = len(x)
    if n < 500:
        logger.warning("fitting ARFIMA on %d observations; at least 500 are recommended", n)
    if np.var(x) == 0:
        raise OptimizerDivergence("series is constant; the innovation variance is zero")

    def objective(theta):
        p = _concentrated(theta, x, truncation, estimate_ma)
        return 0.5 * np.log(p.sigma_u2)

    bounds = [(None, None), (-_PHI_BOUND, _PHI_BOUND), (-_D_BOUND, _D_BOUND)]
    if estimate_ma:
        bounds.append((-_PHI_BOUND, _PHI_BOUND))
    mean = float(np.mean(x))
    starts = [(mean, phi, d) for phi, d in ((0.0, 0.4), (0.5, 0.1), (-0.3, 0.45))]
    results = []
    for start in starts:
        theta0 = np.array(start + ((0.0,) if estimate_ma else ()))
        try:
            res = minimize(objective, theta0, method="L-BFGS-B", bounds=bounds)
        except (ValueError, FloatingPointError) as e:
            logger.debug("ARFIMA start %s failed: %s", start, e)
            continue
        if np.isfinite(res.fun):
            results.append(res)
    if not results:
        raise OptimizerDivergence("no ARFIMA start converged to a finite likelihood")
    best = min(results, key=lambda r: r.fun)
    if not best.success:
        logger.warning("ARFIMA optimizer stopped early: %s", best.message)
    params = _concentrated(best.x, x, truncation, estimate_ma)
    if abs(params.d) > _D_BOUND - 1e-3:
        logger.warning("fitted d = %.4f is at the stationarity boundary", params.d)
    loglik = arfima_loglik(params, x, truncation)

    labels = ["mu", "phi", "d", "sigma_u2"] + (["ma_psi"] if estimate_ma else [])
    theta_hat = np.array([getattr(params, k) for k in labels])

    def full_loglik(theta):
        kw = dict(zip(labels, theta))
        try:
            return arfima_loglik(ArfimaParams(**kw), x, truncation)
        except (ValueError, NonFiniteLikelihood):
            return np.nan

    std_errors = np.full(len(labels), np.nan)
    hess = approx_hess3(theta_hat, full_loglik)
    if np.all(np.isfinite(hess)):
        try:
            cov = np.linalg.inv(-hess)
            diag = np.diag(cov)
            std_errors = np.where(diag > 0, np.sqrt(np.abs(diag)), np.nan)
        except np.linalg.LinAlgError:
            pass
    if np.any(np.isnan(std_errors)):
        logger.warning("ARFIMA Hessian is not negative definite; some standard errors are undefined")
    k = len(labels)
    return ArfimaFit(
        params=params,
        loglik=loglik,
        aic=2.0 * k - 2.0 * loglik,
        n=n,
        truncation=truncation,
        labels=labels,
        std_errors=std_errors,
        tstats=theta_hat / std_errors,
        estimate_ma=estimate_ma,
        starts=[float(r.fun) for r in results],
    )


def simulate_arfima(params: ArfimaParams, n: int, seed=None, burn: int = 1000) -> np.ndarray:
    """Draw a series of length ``n`` from the process; the first ``burn`` values are discarded."""
    rng = np.random.default_rng(seed)
    total = n + burn
    u = rng.standard_normal(total) * np.sqrt(params.sigma_u2)
    v = lfilter([1.0, -params.ma_psi], [1.0], u)
    e = lfilter([1.0], [1.0, -params.phi], v)
    x = fftconvolve(e, frac_diff_weights(-params.d, total - 1))[:total]
    return params.mu + x[burn:]


def mixture_cdf(q, variance_draws) -> float:
    """Probability that a normal with variance drawn from ``variance_draws`` falls below ``q``."""
    s = np.sqrt(np.asarray(variance_draws, dtype=float))
    return float(np.mean(stats.norm.cdf(q / s)))


def _mixture_quantile(alpha, variance_draws):
    if alpha == 0.5:
        return 0.0
    z = stats.norm.ppf(alpha)
    s_min, s_max = np.sqrt(variance_draws.min()), np.sqrt(variance_draws.max())
    if s_max - s_min <= 1e-14 * s_max:
        return float(z * np.sqrt(np.mean(variance_draws)))
    a, b = sorted((z * s_min, z * s_max))
    try:
        return float(brentq(lambda q: mixture_cdf(q, variance_draws) - alpha, a, b, xtol=1e-12))
    except ValueError as e:
        raise RootBracketFailure(f"mixture quantile at alpha={alpha} not bracketed by [{a}, {b}]: {e}")


@dataclass
class MixtureForecast:
    horizon: int
    rv_quantiles: Dict[float, float]
    return_quantiles: Dict[float, float]
    n_draws: int
    seed: int
    variance_draws: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "rv_quantiles": self.rv_quantiles,
            "return_quantiles": self.return_quantiles,
            "n_draws": self.n_draws,
            "seed": self.seed,
        }

    def to_frame(self, date=None) -> pd.DataFrame:
        rows = []
        for kind, qs in (("return", self.return_quantiles), ("rv_sqrt", self.rv_quantiles)):
            for a, q in qs.items():
                rows.append({"date": date, "target": kind, "alpha": a, "horizon": self.horizon, "q": q})
        return pd.DataFrame(rows)


def _simulate_paths(params: ArfimaParams, history, horizon, n_draws, rng, truncation):
    """Log-RV paths over the next ``horizon`` days, shape ``(n_draws, horizon)``.

    Also returns the one-step conditional mean.
    """
    x = np.asarray(history, dtype=float)
    e, u = _residuals(params, x, truncation)
    k_max = _n_lags(truncation, len(x))
    w = frac_diff_weights(params.d, k_max)
    xt = x - params.mu
    # tail[k-1] holds x~[n-k] for k = 1..k_max
    tail = xt[::-1][:k_max]

    shocks = rng.standard_normal((n_draws, horizon)) * np.sqrt(params.sigma_u2)
    paths = np.empty((n_draws, horizon))
    e_prev = np.full(n_draws, e[-1])
    u_prev = np.full(n_draws, u[-1])
    m1 = None
    for j in range(horizon):
        # lags k = j+1..k_max reach back into the observed history
        past = np.dot(w[j + 1 : k_max + 1], tail[: k_max - j]) if j < k_max else 0.0  # noqa: E203
        future = paths[:, :j][:, ::-1] @ w[1 : j + 1] if j else 0.0  # noqa: E203
        e_mean = params.phi * e_prev - params.ma_psi * u_prev
        if j == 0:
            m1 = float(params.mu + e_mean[0] - past)
        e_new = e_mean + shocks[:, j]
        paths[:, j] = e_new - past - future
        e_prev, u_prev = e_new, shocks[:, j]
    return params.mu + paths, m1


def forecast_mixture_horizons(
    params: ArfimaParams,
    history,
    horizons: Sequence[int],
    alphas: Sequence[float],
    n_draws: int = 10000,
    seed: int = 0,
    truncation: int = DEFAULT_TRUNCATION,
) -> Dict[int, MixtureForecast]:
    """Quantile forecasts at several horizons from one set of simulated paths."""
    _check_truncation(truncation)
    history = np.asarray(history, dtype=float)
    if len(history) < truncation:
        logger.warning("history of %d days is shorter than the truncation %d", len(history), truncation)
    horizons = sorted(set(int(h) for h in horizons))
    if horizons[0] < 1:
        raise ValueError(f"horizons must be >= 1, got {horizons}")
    if horizons[-1] > truncation:
        raise ValueError(f"horizon {horizons[-1]} exceeds the truncation {truncation}")
    alphas = [float(a) for a in alphas]
    if any(not 0 < a < 1 for a in alphas):
        raise ValueError(f"alphas must be in (0, 1), got {alphas}")
    rng = np.random.default_rng(seed)
    paths, m1 = _simulate_paths(params, history, horizons[-1], n_draws, rng, truncation)
    cum_rv = np.cumsum(np.exp(paths), axis=1)
    s1 = np.sqrt(params.sigma_u2)

    out = {}
    for h in horizons:
        variance = cum_rv[:, h - 1]
        if h == 1:
            rv_q = {a: float(np.exp(0.5 * (m1 + s1 * stats.norm.ppf(a)))) for a in alphas}
        else:
            rv_q = dict(zip(alphas, np.quantile(np.sqrt(variance), alphas).astype(float)))
        ret_q = {a: _mixture_quantile(a, variance) for a in alphas}
        out[h] = MixtureForecast(h, rv_q, ret_q, n_draws, seed, variance_draws=variance)
    return out


def forecast_mixture(
    params: ArfimaParams,
    history,
    horizon: int,
    alphas: Sequence[float],
    n_draws: int = 10000,
    seed: int = 0,
    truncation: int = DEFAULT_TRUNCATION,
) -> MixtureForecast:
    """Return and RV^(1/2) quantile forecasts ``horizon`` days past the end of ``history``.

    The one-day RV^(1/2) quantile is taken from the Gaussian one-step predictive
    of log RV. All other quantiles come from ``n_draws`` simulated log-RV paths:
    RV^(1/2) quantiles are empirical quantiles of ``sqrt(sum RV)``, return
    quantiles solve ``mixture_cdf(q) = alpha``.
    """
    return forecast_mixture_horizons(params, history, [horizon], alphas, n_draws, seed, truncation)[int(horizon)]
