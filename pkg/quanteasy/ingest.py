# -*- coding: utf-8 -*-

"""Loading tick files and sampling them onto a regular intraday grid.

All log-prices and returns are expressed in percent (100 times the natural log).
"""
import datetime
import logging
from collections import abc
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyDay, EmptyFile, NoValidDays, TooFewObservations, UnparseableRow

logger = logging.getLogger(__name__)

__all__ = [
    "TickRecord",
    "Ticks",
    "SessionSpec",
    "IntradayGrid",
    "load_ticks",
    "sample_last_tick",
    "daily_returns",
    "intraday_frame",
    "volatility_signature",
]

DEFAULT_SCHEMA = {"timestamp": "timestamp", "price": "price", "format": None}


class TickRecord(NamedTuple):
    timestamp: pd.Timestamp
    price: float


class Ticks(abc.Sequence):
    """Time-sorted ticks backed by a DataFrame with ``timestamp`` and ``price`` columns.

    Indexing and iteration yield :class:`TickRecord`.

    Attributes
    ----------
    frame :
        The sorted ticks.
    malformed :
        ``(row, reason)`` for every row skipped while loading.
    """

    def __init__(self, frame: pd.DataFrame, malformed=None):
        frame = frame.loc[:, ["timestamp", "price"]]
        self.frame = frame.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
        self.malformed = list(malformed or [])

    @classmethod
    def from_records(cls, records: Iterable):
        records = list(records)
        return cls(
            pd.DataFrame(
                {
                    "timestamp": pd.to_datetime([r[0] for r in records]),
                    "price": np.asarray([r[1] for r in records], dtype=float),
                }
            )
        )

    def __len__(self):
        return len(self.frame)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Ticks(self.frame.iloc[i])
        row = self.frame.iloc[i]
        return TickRecord(row["timestamp"], float(row["price"]))

    def __iter__(self):
        for ts, p in zip(self.frame["timestamp"], self.frame["price"]):
            yield TickRecord(ts, float(p))


def load_ticks(path, schema: Optional[dict] = None, errors: str = "raise") -> Ticks:
    """Read a tick CSV.

    Parameters
    ----------
    path :
        CSV file with a header row.
    schema :
        Column map with keys ``timestamp``, ``price`` and optionally ``format``
        (``"iso"``, ``"epoch_ms"`` or ``None`` to detect).
    errors :
        ``"raise"`` stops at the first malformed row with :class:`UnparseableRow`,
        ``"skip"`` drops malformed rows and records them in ``Ticks.malformed``.

    Returns
    -------
        Ticks sorted by timestamp; rows with equal timestamps keep file order.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty")
    for key in ("timestamp", "price"):
        if schema[key] not in raw.columns:
            raise UnparseableRow(0, f"missing column {schema[key]!r} in header")
    if len(raw) == 0:
        raise EmptyFile(f"{path} has no data rows")

    ts_raw = raw[schema["timestamp"]].str.strip()
    fmt = schema["format"]
    if fmt is None:
        fmt = "epoch_ms" if ts_raw.str.fullmatch(r"\d+").all() else "iso"
    if fmt == "epoch_ms":
        timestamp = pd.to_datetime(pd.to_numeric(ts_raw, errors="coerce"), unit="ms", errors="coerce")
    elif fmt == "iso":
        timestamp = pd.to_datetime(ts_raw, errors="coerce", format="ISO8601")
    else:
        timestamp = pd.to_datetime(ts_raw, errors="coerce", format=fmt)
    if getattr(timestamp.dt, "tz", None) is not None:
        timestamp = timestamp.dt.tz_localize(None)
    price = pd.to_numeric(raw[schema["price"]].str.strip(), errors="coerce")

    reasons = pd.Series("", index=raw.index)
    reasons[~(price > 0)] = "non-positive price"
    reasons[price.isna()] = "unparseable price"
    reasons[timestamp.isna()] = "unparseable timestamp"
    bad = reasons != ""
    malformed = [(int(i), reasons[i]) for i in raw.index[bad]]
    if malformed:
        if errors == "raise":
            raise UnparseableRow(*malformed[0])
        logger.warning("%s: skipped %d malformed rows (first: row %d, %s)", path, len(malformed), *malformed[0])

    frame = pd.DataFrame({"timestamp": timestamp[~bad], "price": price[~bad].astype(float)})
    if len(frame) == 0:
        raise EmptyFile(f"{path} has no valid rows")
    return Ticks(frame, malformed)


@dataclass(frozen=True)
class SessionSpec:
    """Trading session on which the intraday grid is laid out.

    Parameters
    ----------
    open_time, close_time :
        Exchange-local session bounds.
    bar_interval :
        Grid spacing, must divide the session evenly.
    excluded_dates :
        Calendar dates to drop.
    min_ticks :
        Days with fewer in-session ticks are dropped.
    """

    open_time: datetime.time = datetime.time(9, 30)
    close_time: datetime.time = datetime.time(16, 0)
    bar_interval: pd.Timedelta = pd.Timedelta(minutes=5)
    excluded_dates: FrozenSet[datetime.date] = field(default_factory=frozenset)
    min_ticks: int = 50

    def __post_init__(self):
        object.__setattr__(self, "bar_interval", pd.Timedelta(self.bar_interval))
        object.__setattr__(self, "excluded_dates", frozenset(pd.Timestamp(d).date() for d in self.excluded_dates))
        if not self.open_time < self.close_time:
            raise ValueError(f"open_time {self.open_time} must be before close_time {self.close_time}")
        length = self.session_length
        if self.bar_interval <= pd.Timedelta(0) or length % self.bar_interval != pd.Timedelta(0):
            raise ValueError(f"bar_interval {self.bar_interval} does not divide the session length {length}")

    @property
    def session_length(self) -> pd.Timedelta:
        day = datetime.date(2000, 1, 1)
        return pd.Timestamp.combine(day, self.close_time) - pd.Timestamp.combine(day, self.open_time)

    @property
    def n_bars(self) -> int:
        return int(self.session_length / self.bar_interval)

    def grid_times(self, day) -> pd.DatetimeIndex:
        start = pd.Timestamp.combine(day, self.open_time)
        return pd.date_range(start, periods=self.n_bars + 1, freq=self.bar_interval)

    def with_interval(self, minutes) -> "SessionSpec":
        return SessionSpec(
            self.open_time, self.close_time, pd.Timedelta(minutes=minutes), self.excluded_dates, self.min_ticks
        )


@dataclass
class IntradayGrid:
    """One trading day sampled on the session grid (percent log units)."""

    day: datetime.date
    log_prices: np.ndarray
    log_returns: np.ndarray = None

    def __post_init__(self):
        self.log_prices = np.asarray(self.log_prices, dtype=float)
        if self.log_returns is None:
            self.log_returns = np.diff(self.log_prices)
        self.log_returns = np.asarray(self.log_returns, dtype=float)
        if len(self.log_returns) < 3:
            raise TooFewObservations(f"{self.day}: {len(self.log_returns)} intraday returns, need at least 3")

    @property
    def m(self) -> int:
        return len(self.log_returns)

    @property
    def daily_return(self) -> float:
        return float(self.log_returns.sum())


def sample_last_tick(
    ticks: Sequence, spec: SessionSpec = SessionSpec(), min_ticks: Optional[int] = None
) -> List[IntradayGrid]:
    """Sample ticks on the session grid with the last-tick rule.

    The price at a grid point is the last tick at or before it. Grid points
    before the first tick of the day take that first tick.
    """
    frame = ticks.frame if isinstance(ticks, Ticks) else Ticks.from_records(ticks).frame
    if len(frame) == 0:
        raise NoValidDays("no ticks given")
    min_ticks = spec.min_ticks if min_ticks is None else min_ticks
    ts = frame["timestamp"]
    tod = ts.dt.time
    in_session = (tod >= spec.open_time) & (tod <= spec.close_time)
    session = frame[in_session.values]

    grids = []
    n_excluded, short_days = 0, []
    for day, day_ticks in session.groupby(session["timestamp"].dt.date, sort=True):
        if day in spec.excluded_dates:
            n_excluded += 1
            continue
        if len(day_ticks) < min_ticks:
            short_days.append((day, len(day_ticks)))
            continue
        times = day_ticks["timestamp"].values
        pos = np.searchsorted(times, spec.grid_times(day).values, side="right") - 1
        prices = day_ticks["price"].values[np.clip(pos, 0, None)]
        grids.append(IntradayGrid(day, 100.0 * np.log(prices)))
    for day, n in short_days:
        logger.warning("dropping %s: %d ticks in session, minimum is %d", day, n, min_ticks)
    if n_excluded:
        logger.info("dropped %d excluded dates", n_excluded)
    if not grids:
        raise NoValidDays("no session day survived the exclusion and minimum-tick filters")
    return grids


def daily_returns(grids: Sequence[IntradayGrid]) -> pd.Series:
    """Open-to-close returns, the telescoping sum of each day's intraday returns."""
    if not len(grids):
        raise EmptyDay("no intraday grids given")
    return pd.Series(
        [g.daily_return for g in grids],
        index=pd.DatetimeIndex([pd.Timestamp(g.day) for g in grids], name="date"),
        name="return",
    )


def intraday_frame(grids: Sequence[IntradayGrid], spec: SessionSpec = SessionSpec()) -> pd.DataFrame:
    """One row per bar: date, bar number, bar end time and log-return."""
    frames = []
    for g in grids:
        times = spec.grid_times(g.day)[1:]
        frames.append(
            pd.DataFrame(
                {
                    "date": pd.Timestamp(g.day).strftime("%Y-%m-%d"),
                    "bar": np.arange(1, g.m + 1),
                    "time": times.strftime("%H:%M:%S") if len(times) == g.m else "",
                    "log_return": g.log_returns,
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def volatility_signature(
    ticks: Ticks, spec: SessionSpec = SessionSpec(), minutes=(1, 2, 5, 10, 15, 30)
) -> pd.DataFrame:
    """Mean daily realized variance for a range of sampling intervals.

    Intervals that do not divide the session are skipped.
    """
    rows = []
    for k in minutes:
        try:
            sub = spec.with_interval(k)
        except ValueError:
            logger.info("skipping %d-minute sampling: does not divide the session", k)
            continue
        if sub.n_bars < 3:
            continue
        grids = sample_last_tick(ticks, sub)
        rv = np.array([np.sum(g.log_returns ** 2) for g in grids])
        std_rv = rv.std(ddof=1) if len(rv) > 1 else 0.0
        rows.append({"minutes": k, "m": sub.n_bars, "mean_rv": rv.mean(), "std_rv": std_rv})
    return pd.DataFrame(rows)
