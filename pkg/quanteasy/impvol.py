# -*- coding: utf-8 -*-

"""Model-free implied volatility from American futures-option quotes.

Quotes are inverted to implied volatilities with the Barone-Adesi-Whaley
approximation, the out-of-the-money smile is interpolated linearly in
log-moneyness, repriced with Black-76 and integrated into a variance swap rate.
Two maturities are interpolated to a constant 30-day horizon.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, stats

from .errors import DataError, EmptyFile, NoBracket, NoBracketingMaturities, NoValidDays, RootFailure, TooFewQuotes

logger = logging.getLogger(__name__)

__all__ = [
    "OptionQuote",
    "SmileGrid",
    "TermPoint",
    "black76_price",
    "baw_price",
    "invert_baw_iv",
    "clean_quotes",
    "build_smile",
    "synth_variance_swap",
    "interp_30d",
    "implied_vol_index",
    "load_quotes",
    "load_zero_curve",
    "zero_rate",
]

DAYS_PER_YEAR = 365.0
IV_BOUNDS = (1e-4, 5.0)
CRITICAL_TOL = 1e-10


def _is_call(option_type) -> bool:
    t = str(option_type).strip().lower()
    if t in ("c", "call"):
        return True
    if t in ("p", "put"):
        return False
    raise ValueError(f"option type must be put or call, got {option_type!r}")


def black76_price(F, X, tau, sigma, discount=1.0, option_type="call"):
    """Discounted Black-76 value of a European option on a futures contract.

    Broadcasts over array arguments. ``sigma * sqrt(tau) == 0`` gives the
    discounted intrinsic value.
    """
    arrays = (np.asarray(v, dtype=float) for v in (F, X, tau, sigma, discount))
    F, X, tau, sigma, discount = np.broadcast_arrays(*arrays)
    call = _is_call(option_type)
    vol = sigma * np.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(F / X) + 0.5 * vol ** 2) / vol
        d2 = d1 - vol
        if call:
            price = F * stats.norm.cdf(d1) - X * stats.norm.cdf(d2)
            intrinsic = np.maximum(F - X, 0.0)
        else:
            price = X * stats.norm.cdf(-d2) - F * stats.norm.cdf(-d1)
            intrinsic = np.maximum(X - F, 0.0)
    out = discount * np.where(vol > 0, price, intrinsic)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def _d1(F, X, tau, sigma):
    vol = sigma * np.sqrt(tau)
    return (np.log(F / X) + 0.5 * vol ** 2) / vol


def _critical_price(X, tau, sigma, rate, call):
    """Futures price at which immediate exercise becomes optimal."""
    vol = sigma * np.sqrt(tau)
    disc = np.exp(-rate * tau)
    m = 2.0 * rate / sigma ** 2
    k = 1.0 - disc
    root = np.sqrt(1.0 + 4.0 * m / k)
    q = (1.0 + root) / 2.0 if call else (1.0 - root) / 2.0
    q_inf = (1.0 + np.sqrt(1.0 + 4.0 * m)) / 2.0 if call else (1.0 - np.sqrt(1.0 + 4.0 * m)) / 2.0
    s_inf = X / (1.0 - 1.0 / q_inf)
    kind = "call" if call else "put"

    if call:

        def g(s):
            early = s / q * (1.0 - disc * stats.norm.cdf(_d1(s, X, tau, sigma)))
            return s - X - black76_price(s, X, tau, sigma, disc, "call") - early

        def dg(s):
            n1 = disc * stats.norm.cdf(_d1(s, X, tau, sigma))
            return 1.0 - n1 - (1.0 - n1) / q + disc * stats.norm.pdf(_d1(s, X, tau, sigma)) / (q * vol)

        seed = X + (s_inf - X) * (1.0 - np.exp(-2.0 * vol * X / (s_inf - X)))
    else:

        def g(s):
            early = s / q * (1.0 - disc * stats.norm.cdf(-_d1(s, X, tau, sigma)))
            return X - s - black76_price(s, X, tau, sigma, disc, "put") + early

        def dg(s):
            n1 = disc * stats.norm.cdf(-_d1(s, X, tau, sigma))
            return -1.0 + n1 + (1.0 - n1) / q + disc * stats.norm.pdf(_d1(s, X, tau, sigma)) / (q * vol)

        seed = s_inf + (X - s_inf) * np.exp(-2.0 * vol * X / (X - s_inf))

    try:
        s = optimize.newton(g, seed, fprime=dg, tol=CRITICAL_TOL, maxiter=100)
        if np.isfinite(s) and s > 0 and ((call and s >= X) or (not call and s <= X)) and abs(g(s)) < 1e-8 * X:
            return float(s), q
    except (RuntimeError, OverflowError, FloatingPointError):
        pass

    # bracketed fallback: g(X) < 0 and g changes sign away from X
    lo, hi = (X, 2.0 * X) if call else (0.5 * X, X)
    for _ in range(60):
        far = hi if call else lo
        if g(far) > 0:
            break
        if call:
            lo, hi = hi, 2.0 * hi
        else:
            lo, hi = 0.5 * lo, lo
    else:
        raise RootFailure(f"no critical {kind} futures price found for X={X}, tau={tau}, sigma={sigma}, rate={rate}")
    try:
        return float(optimize.brentq(g, lo, hi, xtol=CRITICAL_TOL)), q
    except ValueError as e:
        raise RootFailure(f"critical {kind} price solver failed: {e}")


def baw_price(F, X, tau, sigma, rate, option_type="call") -> float:
    """Barone-Adesi-Whaley value of an American option on a futures contract.

    Non-positive rates carry no early-exercise premium, so the European value
    is returned.
    """
    call = _is_call(option_type)
    disc = np.exp(-rate * tau)
    european = black76_price(F, X, tau, sigma, disc, option_type)
    if tau <= 0 or sigma <= 0:
        return max(european, max(F - X, 0.0) if call else max(X - F, 0.0))
    if rate <= 0:
        return european
    s, q = _critical_price(X, tau, sigma, rate, call)
    if call:
        if F >= s:
            return float(F - X)
        a = s / q * (1.0 - disc * stats.norm.cdf(_d1(s, X, tau, sigma)))
        return float(european + a * (F / s) ** q)
    if F <= s:
        return float(X - F)
    a = -s / q * (1.0 - disc * stats.norm.cdf(-_d1(s, X, tau, sigma)))
    return float(european + a * (F / s) ** q)


@dataclass(frozen=True)
class OptionQuote:
    quote_date: pd.Timestamp
    expiry: pd.Timestamp
    strike: float
    option_type: str
    price: float
    futures_price: float
    rate: float = 0.0
    underlying_future_expiry: Optional[pd.Timestamp] = None

    def __post_init__(self):
        object.__setattr__(self, "quote_date", pd.Timestamp(self.quote_date))
        object.__setattr__(self, "expiry", pd.Timestamp(self.expiry))
        object.__setattr__(self, "option_type", "call" if _is_call(self.option_type) else "put")
        if not (self.strike > 0 and self.futures_price > 0):
            raise ValueError(f"strike and futures price must be positive: {self}")

    @property
    def days(self) -> int:
        return (self.expiry - self.quote_date).days

    @property
    def tau(self) -> float:
        return self.days / DAYS_PER_YEAR

    @property
    def discount(self) -> float:
        return float(np.exp(-self.rate * self.tau))

    @property
    def moneyness(self) -> float:
        return float(np.log(self.strike / self.futures_price))

    @property
    def is_call(self) -> bool:
        return self.option_type == "call"


def invert_baw_iv(quote: OptionQuote, bounds: Tuple[float, float] = IV_BOUNDS) -> float:
    """Volatility at which the BAW value matches the quoted price."""

    def f(sigma):
        model = baw_price(quote.futures_price, quote.strike, quote.tau, sigma, quote.rate, quote.option_type)
        return model - quote.price

    lo, hi = bounds
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0 or f_hi < 0:
        lo, hi = f_lo + quote.price, f_hi + quote.price
        raise NoBracket(f"price {quote.price} outside the attainable range [{lo:.6g}, {hi:.6g}]")
    if f_lo == 0:
        return lo
    return float(optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-12))


def clean_quotes(
    quotes: Sequence[OptionQuote], min_days: int = 10, price_floor: float = 0.05
) -> Tuple[List[OptionQuote], List[Tuple[OptionQuote, str]]]:
    """Drop quotes by maturity, then price floor, then American no-arbitrage bounds.

    Returns ``(kept, dropped)`` with a reason for every dropped quote.
    """
    kept, dropped = [], []
    for q in quotes:
        if q.days < min_days:
            dropped.append((q, "maturity"))
        elif q.price < price_floor:
            dropped.append((q, "price floor"))
        else:
            F, X = q.futures_price, q.strike
            lower, upper = (max(F - X, 0.0), F) if q.is_call else (max(X - F, 0.0), X)
            if lower <= q.price <= upper:
                kept.append(q)
            else:
                dropped.append((q, "arbitrage bound"))
    if dropped:
        counts = pd.Series([r for _, r in dropped]).value_counts().to_dict()
        logger.info("dropped %d of %d quotes: %s", len(dropped), len(quotes), counts)
    return kept, dropped


@dataclass
class SmileGrid:
    expiry: pd.Timestamp
    moneyness_grid: np.ndarray
    iv: np.ndarray
    F: float
    tau: float
    quote_date: Optional[pd.Timestamp] = None
    quote_moneyness: np.ndarray = field(default=None, repr=False)
    quote_iv: np.ndarray = field(default=None, repr=False)

    @property
    def strikes(self) -> np.ndarray:
        return self.F * np.exp(self.moneyness_grid)

    @property
    def atm_iv(self) -> float:
        return float(np.interp(0.0, self.moneyness_grid, self.iv))


def build_smile(quotes: Sequence[OptionQuote], grid_points: int = 2001, n_std: float = 10.0) -> SmileGrid:
    """Out-of-the-money implied volatility smile of one expiry on a moneyness grid.

    Puts are used below the futures price and calls at or above it. The grid
    spans ``n_std`` ATM standard deviations either side; volatilities beyond
    the extreme strikes are held flat.
    """
    if not quotes:
        raise TooFewQuotes("no quotes given")
    expiries = {q.expiry for q in quotes}
    if len(expiries) != 1:
        raise DataError(f"quotes span {len(expiries)} expiries, expected one")
    rows = []
    for q in quotes:
        k = q.moneyness
        if (k < 0 and q.is_call) or (k >= 0 and not q.is_call):
            continue
        try:
            rows.append((k, invert_baw_iv(q)))
        except (NoBracket, RootFailure) as e:
            logger.warning(
                "%s %s %s strike %.4g dropped: %s", q.quote_date.date(), q.expiry.date(), q.option_type, q.strike, e
            )
    if len(rows) < 2:
        raise TooFewQuotes(f"{len(rows)} usable out-of-the-money quotes for expiry {next(iter(expiries)).date()}")
    table = pd.DataFrame(rows, columns=["k", "iv"]).groupby("k", sort=True)["iv"].mean()
    ks, ivs = table.index.to_numpy(dtype=float), table.to_numpy(dtype=float)
    if len(ks) < 2:
        raise TooFewQuotes("out-of-the-money quotes share a single strike")
    first = quotes[0]
    atm = float(np.interp(0.0, ks, ivs))
    half = n_std * atm * np.sqrt(first.tau)
    grid = np.linspace(-half, half, grid_points)
    return SmileGrid(
        expiry=first.expiry,
        moneyness_grid=grid,
        iv=np.interp(grid, ks, ivs),
        F=float(np.median([q.futures_price for q in quotes])),
        tau=first.tau,
        quote_date=first.quote_date,
        quote_moneyness=ks,
        quote_iv=ivs,
    )


@dataclass(frozen=True)
class TermPoint:
    expiry: pd.Timestamp
    imv: float
    discount: float
    days: int


def synth_variance_swap(smile: SmileGrid, discount: float) -> TermPoint:
    """Annualized variance swap rate replicated from the smile's out-of-the-money prices."""
    strikes = smile.strikes
    call = black76_price(smile.F, strikes, smile.tau, smile.iv, discount, "call")
    put = black76_price(smile.F, strikes, smile.tau, smile.iv, discount, "put")
    otm = np.where(strikes < smile.F, put, call)
    integral = integrate.trapezoid(otm / strikes ** 2, strikes)
    imv = max(0.0, 2.0 / (discount * smile.tau) * integral)
    days = int(round(smile.tau * DAYS_PER_YEAR))
    return TermPoint(smile.expiry, imv, discount, days)


def interp_30d(
    p1: TermPoint, p2: TermPoint, quote_date=None, target_days: int = 30, extrapolate: bool = False
) -> float:
    """Variance swap rate at ``target_days``, interpolated linearly in total variance."""
    d1, d2 = p1.days, p2.days
    if d1 == target_days:
        return p1.imv
    if d2 == target_days:
        return p2.imv
    if not d1 < d2:
        raise NoBracketingMaturities(f"maturities {d1} and {d2} days are not increasing")
    if not extrapolate and not d1 <= target_days <= d2:
        raise NoBracketingMaturities(f"maturities {d1} and {d2} days do not bracket {target_days} days")
    value = (p1.imv * d1 * (d2 - target_days) + p2.imv * d2 * (target_days - d1)) / ((d2 - d1) * target_days)
    if value < 0:
        logger.warning("%s: extrapolated variance %.6g clamped at 0", quote_date, value)
    return max(0.0, float(value))


def _term_points(quotes, grid_points, n_std):
    points = []
    by_expiry = {}
    for q in quotes:
        by_expiry.setdefault(q.expiry, []).append(q)
    for expiry in sorted(by_expiry):
        group = by_expiry[expiry]
        try:
            smile = build_smile(group, grid_points, n_std)
        except TooFewQuotes as e:
            logger.info("%s: expiry %s skipped: %s", group[0].quote_date.date(), expiry.date(), e)
            continue
        points.append(synth_variance_swap(smile, group[0].discount))
    return points


def _index_for_day(points: List[TermPoint], day, target_days, single_expiry):
    below = [p for p in points if p.days <= target_days]
    above = [p for p in points if p.days >= target_days]
    if below and above:
        p1, p2 = below[-1], above[0]
        if p1.days == p2.days:
            return p1.imv, "exact"
        return interp_30d(p1, p2, day, target_days), "interpolated"
    if len(points) >= 2:
        pair = points[:2] if above else points[-2:]
        return interp_30d(pair[0], pair[1], day, target_days, extrapolate=True), "extrapolated"
    if len(points) == 1 and single_expiry:
        return points[0].imv, "single_expiry"
    raise NoBracketingMaturities(f"{day}: {len(points)} usable expiries")


def implied_vol_index(
    quotes: Sequence[OptionQuote],
    target_days: int = 30,
    grid_points: int = 2001,
    n_std: float = 10.0,
    min_days: int = 10,
    price_floor: float = 0.05,
    single_expiry: bool = False,
) -> pd.DataFrame:
    """Constant-maturity implied variance and volatility for every quote date.

    Days without a usable pair of maturities are logged and left out. The
    ``method`` column records whether the value was interpolated, extrapolated
    or taken from a single expiry.
    """
    kept, _ = clean_quotes(quotes, min_days, price_floor)
    by_day = {}
    for q in kept:
        by_day.setdefault(q.quote_date, []).append(q)
    if not by_day:
        raise NoValidDays("no quote survived cleaning")
    rows = []
    for day in sorted(by_day):
        points = _term_points(by_day[day], grid_points, n_std)
        try:
            imv, method = _index_for_day(points, day.date(), target_days, single_expiry)
        except NoBracketingMaturities as e:
            logger.warning("no implied volatility for %s: %s", day.date(), e)
            continue
        rows.append({"date": day, "imv_30d": imv, "iv_30d": np.sqrt(imv), "n_expiries": len(points), "method": method})
    frame = pd.DataFrame(rows, columns=["date", "imv_30d", "iv_30d", "n_expiries", "method"])
    return frame.set_index("date")


def load_zero_curve(path) -> pd.DataFrame:
    """Zero curve CSV with columns ``date``, ``days`` and ``rate`` (continuously compounded)."""
    curve = pd.read_csv(path, parse_dates=["date"])
    missing = {"date", "days", "rate"} - set(curve.columns)
    if missing:
        raise DataError(f"{path}: zero curve is missing columns {sorted(missing)}")
    return curve.sort_values(["date", "days"]).reset_index(drop=True)


def zero_rate(curve: pd.DataFrame, date, days) -> float:
    """Rate for ``days`` to maturity on ``date``, linear in maturity and flat beyond the curve.

    Dates missing from the curve use the latest earlier curve.
    """
    date = pd.Timestamp(date)
    available = curve["date"][curve["date"] <= date]
    if available.empty:
        raise DataError(f"no zero curve on or before {date.date()}")
    day_curve = curve[curve["date"] == available.max()]
    return float(np.interp(days, day_curve["days"], day_curve["rate"]))


def load_quotes(path, curve: Optional[pd.DataFrame] = None) -> List[OptionQuote]:
    """Quote CSV with columns ``date, expiry, strike, cp_flag, settle_price, futures_price``.

    Rates come from ``curve`` when given, else from a ``rate`` column, else 0.
    """
    try:
        frame = pd.read_csv(path, parse_dates=["date", "expiry"])
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty")
    if len(frame) == 0:
        raise EmptyFile(f"{path} has no quotes")
    required = {"date", "expiry", "strike", "cp_flag", "settle_price", "futures_price"}
    missing = required - set(frame.columns)
    if missing:
        raise DataError(f"{path}: quote file is missing columns {sorted(missing)}")
    quotes = []
    for row in frame.itertuples(index=False):
        days = (row.expiry - row.date).days
        if curve is not None:
            rate = zero_rate(curve, row.date, days)
        else:
            rate = float(getattr(row, "rate", 0.0))
        quotes.append(
            OptionQuote(
                row.date,
                row.expiry,
                float(row.strike),
                row.cp_flag,
                float(row.settle_price),
                float(row.futures_price),
                rate,
            )
        )
    return quotes
