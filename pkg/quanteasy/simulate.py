# -*- coding: utf-8 -*-

"""Synthetic data with known properties: ticks, intraday returns, quantile processes and option quotes."""
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .arfima import ArfimaParams, simulate_arfima
from .impvol import OptionQuote, baw_price
from .ingest import SessionSpec, Ticks
from .measures import MeasurePanel, compute_daily_measures
from .util import write_csv

logger = logging.getLogger(__name__)

__all__ = [
    "brownian_days",
    "simulate_ticks",
    "simulate_panel",
    "simulate_location_scale",
    "location_scale_quantile",
    "simulate_sav",
    "flat_smile_quotes",
    "write_synthetic_dataset",
]

# long-memory log-variance process of the synthetic panel, daily percent units
PANEL_LOG_RV = ArfimaParams(mu=0.0, phi=0.2, d=0.4, sigma_u2=0.15)


def brownian_days(
    n_days: int, m: int, sigma2=1.0, seed=None, jump_size: float = 0.0, jump_bar: Optional[int] = None
) -> np.ndarray:
    """Intraday returns of ``n_days`` Brownian days with ``m`` bars, one day per row.

    Each day has integrated variance ``sigma2`` (scalar or one per day). A
    non-zero ``jump_size`` (in units of the daily standard deviation) is added
    to bar ``jump_bar`` of every day.
    """
    rng = np.random.default_rng(seed)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (n_days,))
    r = rng.standard_normal((n_days, m)) * np.sqrt(sigma2 / m)[:, None]
    if jump_size:
        bar = m // 2 if jump_bar is None else jump_bar
        r[:, bar] += jump_size * np.sqrt(sigma2)
    return r


def _latent_variance(n_days, seed):
    x = simulate_arfima(PANEL_LOG_RV, n_days, seed=seed)
    return np.exp(x)


def simulate_ticks(
    n_days: int = 5,
    spec: SessionSpec = SessionSpec(),
    ticks_per_day: int = 780,
    start="2015-01-05",
    seed=0,
    variance=None,
    jump_prob: float = 0.05,
    price0: float = 100.0,
) -> Ticks:
    """Tick prices on consecutive business days with stochastic daily variance.

    Every day has a tick at the session open; the remaining tick times are
    uniform over the session. Jumps of four daily standard deviations occur
    on a random share ``jump_prob`` of days.
    """
    rng = np.random.default_rng(seed)
    days = pd.bdate_range(start, periods=n_days)
    if variance is None:
        variance = _latent_variance(n_days, rng.integers(2 ** 32))
    variance = np.broadcast_to(np.asarray(variance, dtype=float), (n_days,))
    seconds = spec.session_length.total_seconds()
    logp = 100.0 * np.log(price0)
    stamps, prices = [], []
    for day, v in zip(days, variance):
        offsets = np.sort(np.concatenate([[0.0], rng.uniform(0.0, seconds, ticks_per_day - 1)]))
        dt = np.diff(offsets, prepend=0.0) / seconds
        incr = rng.standard_normal(ticks_per_day) * np.sqrt(v * dt)
        if rng.random() < jump_prob:
            incr[rng.integers(1, ticks_per_day)] += rng.choice([-4.0, 4.0]) * np.sqrt(v)
        path = logp + np.cumsum(incr)
        logp = path[-1]
        open_ts = pd.Timestamp.combine(day.date(), spec.open_time)
        stamps.append(open_ts + pd.to_timedelta(np.round(offsets * 1000.0), unit="ms"))
        prices.append(np.exp(path / 100.0))
    frame = pd.DataFrame({"timestamp": np.concatenate([s.values for s in stamps]), "price": np.concatenate(prices)})
    return Ticks(frame)


def simulate_panel(
    n_days: int = 1500,
    m: int = 78,
    seed=0,
    start="2005-01-03",
    jump_prob: float = 0.05,
    implied_vol_noise: float = 0.1,
):
    """Daily measures from a long-memory stochastic volatility model.

    Returns ``(panel, returns, variance)``: the measure panel (with an
    ``implied_vol`` column equal to the latent volatility times lognormal
    noise), the open-to-close returns and the latent daily variance.
    """
    rng = np.random.default_rng(seed)
    variance = _latent_variance(n_days, rng.integers(2 ** 32))
    r = brownian_days(n_days, m, variance, seed=rng.integers(2 ** 32))
    jumps = rng.random(n_days) < jump_prob
    bars = rng.integers(0, m, n_days)
    r[np.flatnonzero(jumps), bars[jumps]] += rng.choice([-4.0, 4.0], jumps.sum()) * np.sqrt(variance[jumps])
    dates = pd.bdate_range(start, periods=n_days)
    panel = MeasurePanel.from_rows([compute_daily_measures(row, d) for row, d in zip(r, dates)])
    iv = np.sqrt(variance) * np.exp(implied_vol_noise * rng.standard_normal(n_days))
    panel = panel.with_implied_vol(pd.Series(iv, index=dates))
    returns = pd.Series(r.sum(axis=1), index=pd.DatetimeIndex(dates, name="date"), name="return")
    return panel, returns, pd.Series(variance, index=returns.index, name="variance")


def simulate_location_scale(n: int = 5000, seed=0, a: float = 0.0, b: float = 0.0, c: float = 0.5, d: float = 1.0):
    """``y = a + b v + (c + d v) eps`` with ``v`` a positive persistent driver and standard normal ``eps``.

    The conditional alpha-quantile is linear in ``v``:
    ``a + c z + (b + d z) v`` with ``z`` the standard normal quantile. Returns a
    frame with columns ``v`` (known before ``y``) and ``y``.
    """
    rng = np.random.default_rng(seed)
    log_v = np.empty(n)
    log_v[0] = 0.0
    shocks = 0.3 * rng.standard_normal(n)
    for t in range(1, n):
        log_v[t] = 0.9 * log_v[t - 1] + shocks[t]
    v = np.exp(log_v)
    y = a + b * v + (c + d * v) * rng.standard_normal(n)
    return pd.DataFrame({"v": v, "y": y})


def location_scale_quantile(v, alpha, a=0.0, b=0.0, c=0.5, d=1.0):
    z = stats.norm.ppf(alpha)
    return a + c * z + (b + d * z) * np.asarray(v, dtype=float)


def simulate_sav(
    n: int = 5000, alpha: float = 0.05, omega: float = 0.05, beta: float = 0.9, gamma: float = 0.08, seed=0
):
    """Returns with an absolute-value volatility recursion whose alpha-quantile follows SAV exactly.

    With ``sigma[t] = omega + beta sigma[t-1] + gamma |r[t-1]|`` and
    ``r[t] = sigma[t] eps[t]``, the quantile is ``q[t] = z sigma[t]``, so the SAV
    coefficients are ``(z omega, beta, z gamma)``. Returns
    ``(returns, q, theta)``.
    """
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n)
    sigma = np.empty(n)
    r = np.empty(n)
    sigma[0] = omega / (1.0 - beta - gamma * np.sqrt(2.0 / np.pi))
    r[0] = sigma[0] * eps[0]
    for t in range(1, n):
        sigma[t] = omega + beta * sigma[t - 1] + gamma * abs(r[t - 1])
        r[t] = sigma[t] * eps[t]
    z = stats.norm.ppf(alpha)
    return r, z * sigma, np.array([z * omega, beta, z * gamma])


def flat_smile_quotes(
    quote_date,
    expiry_days: Sequence[int] = (20, 48),
    futures_price: float = 100.0,
    sigma: float = 0.2,
    rate: float = 0.01,
    strikes: Optional[Sequence[float]] = None,
) -> list:
    """Out-of-the-money American futures-option quotes priced with BAW at a constant volatility."""
    quote_date = pd.Timestamp(quote_date)
    strikes = np.arange(60.0, 145.0, 2.5) if strikes is None else np.asarray(strikes, dtype=float)
    quotes = []
    for days in expiry_days:
        expiry = quote_date + pd.Timedelta(days=days)
        tau = days / 365.0
        for x in strikes:
            kind = "put" if x < futures_price else "call"
            price = baw_price(futures_price, x, tau, sigma, rate, kind)
            if price >= 0.05:
                quotes.append(OptionQuote(quote_date, expiry, float(x), kind, round(price, 6), futures_price, rate))
    return quotes


def write_synthetic_dataset(
    out_dir, n_days: int = 1500, seed=0, spec: SessionSpec = SessionSpec(), quote_days: int = 5
):
    """Write ``ticks.csv``, ``implied_vol.csv`` and ``quotes.csv`` for a full command-line run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    variance = _latent_variance(n_days, rng.integers(2 ** 32))
    ticks = simulate_ticks(n_days, spec, ticks_per_day=400, seed=rng.integers(2 ** 32), variance=variance)
    frame = ticks.frame.copy()
    frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%S.%f").str[:-3]
    paths = {"ticks": write_csv(frame, out_dir / "ticks.csv")}

    days = pd.bdate_range("2015-01-05", periods=n_days)
    iv = np.sqrt(variance) * np.exp(0.1 * rng.standard_normal(n_days))
    paths["implied_vol"] = write_csv(
        pd.DataFrame({"date": days.strftime("%Y-%m-%d"), "implied_vol": iv}), out_dir / "implied_vol.csv"
    )

    rows = []
    for day, v in zip(days[-quote_days:], variance[-quote_days:]):
        # daily percent variance to annualized volatility
        sigma = float(np.sqrt(v * 252.0) / 100.0)
        for q in flat_smile_quotes(day, sigma=sigma):
            rows.append(
                {
                    "date": q.quote_date.strftime("%Y-%m-%d"),
                    "expiry": q.expiry.strftime("%Y-%m-%d"),
                    "strike": q.strike,
                    "cp_flag": "C" if q.is_call else "P",
                    "settle_price": q.price,
                    "futures_price": q.futures_price,
                    "rate": q.rate,
                }
            )
    paths["quotes"] = write_csv(pd.DataFrame(rows), out_dir / "quotes.csv")
    logger.info("wrote synthetic dataset of %d days to %s", n_days, out_dir)
    return paths
