# -*- coding: utf-8 -*-

"""Daily realized measures computed from intraday returns.

The estimators accept a 1-d array of one day's returns or a 2-d array with one
day per row; 2-d input returns one value per row.
"""
import logging
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.diagnostic import acorr_ljungbox

from .errors import DegenerateDay, EmptyDay, TooFewObservations

logger = logging.getLogger(__name__)

__all__ = [
    "MEDRV_CONST",
    "MEDRQ_CONST",
    "JUMP_THETA",
    "DailyMeasures",
    "MeasurePanel",
    "realized_variance",
    "realized_semivariances",
    "med_rv",
    "med_rq",
    "jump_test_z",
    "decompose_iv_jv",
    "compute_daily_measures",
    "summary_statistics",
]

MEDRV_CONST = np.pi / (6.0 - 4.0 * np.sqrt(3.0) + np.pi)
MEDRQ_CONST = 3.0 * np.pi / (9.0 * np.pi + 72.0 - 52.0 * np.sqrt(3.0))
JUMP_THETA = 0.96
DEFAULT_SIGNIFICANCE = 0.001


def _as_returns(returns, min_m=1):
    r = np.asarray(returns, dtype=float)
    if r.ndim == 0 or r.shape[-1] == 0:
        raise EmptyDay("no intraday returns")
    if r.shape[-1] < min_m:
        raise TooFewObservations(f"{r.shape[-1]} intraday returns, need at least {min_m}")
    return r


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def realized_variance(returns):
    r = _as_returns(returns)
    return _scalar(np.sum(r ** 2, axis=-1))


def realized_semivariances(returns):
    """Returns ``(rs_minus, rs_plus)``; zero returns count towards neither."""
    r = _as_returns(returns)
    rs_minus = np.sum(np.where(r < 0, r, 0.0) ** 2, axis=-1)
    rs_plus = np.sum(np.where(r > 0, r, 0.0) ** 2, axis=-1)
    return _scalar(rs_minus), _scalar(rs_plus)


def _triple_medians(r):
    a = np.abs(r)
    return np.median(np.stack([a[..., :-2], a[..., 1:-1], a[..., 2:]]), axis=0)


def med_rv(returns):
    """Median realized variance, robust to isolated jumps."""
    r = _as_returns(returns, min_m=3)
    m = r.shape[-1]
    med = _triple_medians(r)
    return _scalar(MEDRV_CONST * m / (m - 2) * np.sum(med ** 2, axis=-1))


def med_rq(returns):
    """Median realized quarticity, the variance input of the jump test."""
    r = _as_returns(returns, min_m=3)
    m = r.shape[-1]
    med = _triple_medians(r)
    return _scalar(MEDRQ_CONST * m * m / (m - 2) * np.sum(med ** 4, axis=-1))


def jump_test_z(rv, medrv, medrq, m, theta=JUMP_THETA):
    """Ratio statistic for the presence of jumps; large values reject no-jump."""
    rv, medrv, medrq = (np.asarray(x, dtype=float) for x in (rv, medrv, medrq))
    if np.any(rv <= 0):
        raise DegenerateDay("realized variance is zero")
    if np.any(medrv <= 0):
        raise DegenerateDay("median realized variance is zero")
    scale = np.sqrt(theta / np.asarray(m, dtype=float) * np.maximum(1.0, medrq / medrv ** 2))
    return _scalar((rv - medrv) / rv / scale)


@dataclass(frozen=True)
class DailyMeasures:
    day: pd.Timestamp
    rv: float
    medrv: float
    rs_minus: float
    rs_plus: float
    medrq: float
    z_jump: float
    jump_flag: bool
    iv: float
    jv: float
    m: int
    degenerate: bool = False


def decompose_iv_jv(measures: DailyMeasures, significance: float = DEFAULT_SIGNIFICANCE):
    """Split RV into continuous and jump variation using the shrinkage rule.

    Returns ``(iv, jv, jump_flag)`` with ``iv + jv == rv``.
    """
    if not 0 < significance < 1:
        raise ValueError(f"significance must be in (0, 1), got {significance}")
    critical = stats.norm.ppf(1.0 - significance)
    rv, medrv = measures.rv, measures.medrv
    if not np.isfinite(measures.z_jump) or measures.z_jump <= critical:
        return rv, 0.0, False
    if medrv > rv:
        logger.warning("%s: jump detected but MedRV %.6g exceeds RV %.6g; JV clamped at 0", measures.day, medrv, rv)
        return rv, 0.0, True
    return medrv, rv - medrv, True


def compute_daily_measures(returns, day=None, significance: float = DEFAULT_SIGNIFICANCE) -> DailyMeasures:
    r = _as_returns(returns, min_m=3)
    rv = realized_variance(r)
    rs_minus, rs_plus = realized_semivariances(r)
    medrv, medrq = med_rv(r), med_rq(r)
    m = len(r)
    base = dict(day=day, rv=rv, medrv=medrv, rs_minus=rs_minus, rs_plus=rs_plus, medrq=medrq, m=m)
    if rv == 0 or medrv == 0:
        if rv == 0:
            logger.warning("%s: zero realized variance, day marked degenerate", day)
        return DailyMeasures(**base, z_jump=np.nan, jump_flag=False, iv=rv, jv=0.0, degenerate=rv == 0)
    z = jump_test_z(rv, medrv, medrq, m)
    draft = DailyMeasures(**base, z_jump=z, jump_flag=False, iv=rv, jv=0.0)
    iv, jv, flag = decompose_iv_jv(draft, significance)
    return DailyMeasures(**base, z_jump=z, jump_flag=flag, iv=iv, jv=jv)


PANEL_COLUMNS = [f.name for f in fields(DailyMeasures) if f.name != "day"]


class MeasurePanel(object):
    """Date-indexed table of daily measures with an optional implied volatility column.

    Parameters
    ----------
    frame :
        One row per trading day, columns as in :class:`DailyMeasures`
        (plus ``implied_vol`` when available), indexed by date.
    """

    def __init__(self, frame: pd.DataFrame):
        frame = frame.copy()
        frame.index = pd.DatetimeIndex(frame.index, name="date")
        if not frame.index.is_monotonic_increasing or frame.index.has_duplicates:
            raise ValueError("panel dates must be strictly increasing")
        self.frame = frame

    @classmethod
    def from_rows(cls, rows: Sequence[DailyMeasures]):
        data = pd.DataFrame([asdict(r) for r in rows])
        if len(data) == 0:
            data = pd.DataFrame(columns=["day"] + PANEL_COLUMNS)
        return cls(data.set_index(pd.to_datetime(data.pop("day"))))

    @classmethod
    def from_grids(cls, grids, significance: float = DEFAULT_SIGNIFICANCE):
        return cls.from_rows(
            [compute_daily_measures(g.log_returns, pd.Timestamp(g.day), significance) for g in grids]
        )

    @classmethod
    def read_csv(cls, path):
        frame = pd.read_csv(path, index_col="date", parse_dates=["date"])
        for col in ("jump_flag", "degenerate"):
            if col in frame:
                frame[col] = frame[col].astype(bool)
        return cls(frame)

    def to_csv(self, path):
        from .util import write_csv

        out = self.frame.copy()
        out.index = out.index.strftime("%Y-%m-%d")
        return write_csv(out, path, index=True)

    def __len__(self):
        return len(self.frame)

    def __getitem__(self, col):
        return self.frame[col]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def rows(self) -> List[DailyMeasures]:
        return [
            DailyMeasures(day=d, **{c: r[c] for c in PANEL_COLUMNS})
            for d, r in self.frame[PANEL_COLUMNS].iterrows()
        ]

    @property
    def implied_vol(self) -> Optional[pd.Series]:
        return self.frame["implied_vol"] if "implied_vol" in self.frame else None

    def with_implied_vol(self, series: pd.Series) -> "MeasurePanel":
        """Attach an implied volatility series, aligned by date (missing dates become NaN)."""
        series = pd.Series(series)
        series.index = pd.DatetimeIndex(series.index)
        frame = self.frame.copy()
        frame["implied_vol"] = series.reindex(frame.index).astype(float)
        n_missing = int(frame["implied_vol"].isna().sum())
        if n_missing:
            logger.warning("implied volatility missing on %d of %d panel days", n_missing, len(frame))
        return MeasurePanel(frame)


def summary_statistics(panel: MeasurePanel, returns: Optional[pd.Series] = None, lags: int = 20) -> pd.DataFrame:
    """Descriptive statistics per series with the Ljung-Box Q statistic.

    The frame's ``attrs`` carry the jump-day count, the jump-day share and the
    share of total realized variance due to jumps.
    """
    f = panel.frame[~panel.frame["degenerate"].astype(bool)]
    series = {}
    if returns is not None:
        series["return"] = pd.Series(returns).reindex(f.index)
    for col in ("rv", "rs_minus", "rs_plus", "medrv", "iv", "jv", "implied_vol"):
        if col in f:
            series[col] = f[col]
    rows = {}
    for name, s in series.items():
        x = s.dropna().to_numpy(dtype=float)
        if len(x) < 3:
            continue
        q = np.nan
        if len(x) > lags and np.var(x) > 0:
            q = float(acorr_ljungbox(x, lags=[lags], return_df=True)["lb_stat"].iloc[0])
        rows[name] = {
            "mean": x.mean(),
            "std": x.std(ddof=1),
            "skewness": stats.skew(x),
            "kurtosis": stats.kurtosis(x),
            "min": x.min(),
            "max": x.max(),
            f"ljung_box_{lags}": q,
        }
    table = pd.DataFrame.from_dict(rows, orient="index")
    n_jumps = int(f["jump_flag"].astype(bool).sum())
    table.attrs["jump_days"] = n_jumps
    table.attrs["jump_day_share"] = n_jumps / len(f) if len(f) else np.nan
    table.attrs["jump_qv_share"] = float(f["jv"].sum() / f["rv"].sum()) if len(f) and f["rv"].sum() > 0 else np.nan
    return table
