# -*- coding: utf-8 -*-

"""Model specifications and the construction of regression datasets.

A specification is a target (next-period return or realized volatility), a
horizon and an ordered list of regressor terms. Terms are written as

* ``const`` - intercept,
* ``rv``, ``iv``, ``jv``, ``rs_plus``, ``rs_minus``, ``medrv`` - square root of
  the daily measure,
* ``impvol`` - implied volatility as given,
* ``wed`` - Wednesday dummy,

optionally followed by ``[k]`` for a k-day rolling mean (taken before the square
root) and ``(L)`` for a lag of L days, e.g. ``rv[22]`` or ``impvol(1)``.
"""
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    IndexOutOfRange,
    InsufficientHistory,
    LookAheadError,
    MissingImpliedVol,
    SeriesTooShort,
)
from .measures import MeasurePanel
from .qr import Dataset

logger = logging.getLogger(__name__)

__all__ = [
    "Term",
    "ModelSpec",
    "BuiltDataset",
    "MODELS",
    "get_model",
    "rolling_mean",
    "direct_target",
    "direct_targets",
    "build_features",
    "build_dataset",
    "build_return_dataset",
    "build_rv_dataset",
    "audit_no_lookahead",
]

TARGETS = ("return", "rv_sqrt")
MEASURES = {
    "rv": "RV",
    "iv": "IV",
    "jv": "JV",
    "rs_plus": "RS+",
    "rs_minus": "RS-",
    "medrv": "MedRV",
}
_TERM_RE = re.compile(r"^(?P<name>[a-z_]+)(?:\[(?P<window>\d+)\])?(?:\((?P<lag>-?\d+)\))?$")


@dataclass(frozen=True)
class Term:
    name: str
    window: int = 1
    lag: int = 0

    def __post_init__(self):
        if self.name not in MEASURES and self.name not in ("const", "impvol", "wed"):
            raise ConfigError(f"unknown regressor {self.name!r}")
        if self.window < 1:
            raise ConfigError(f"rolling window must be >= 1, got {self.window}")
        if self.name == "const" and (self.window != 1 or self.lag != 0):
            raise ConfigError("the intercept takes no window or lag")

    @classmethod
    def parse(cls, text: str) -> "Term":
        m = _TERM_RE.match(text.strip().lower())
        if m is None:
            raise ConfigError(f"cannot parse regressor {text!r}")
        return cls(m["name"], int(m["window"] or 1), int(m["lag"] or 0))

    def __str__(self):
        out = self.name
        if self.window != 1:
            out += f"[{self.window}]"
        if self.lag:
            out += f"({self.lag})"
        return out

    @property
    def label(self) -> str:
        if self.name == "const":
            return "const"
        base = {"impvol": "ImpVol", "wed": "Wed"}.get(self.name) or MEASURES[self.name] + "^1/2"
        if self.window != 1:
            base += f"[{self.window}]"
        if self.lag:
            base += f"({self.lag})"
        return base

    @property
    def lookback(self) -> int:
        return self.window - 1 + max(self.lag, 0)

    def values(self, panel: MeasurePanel) -> pd.Series:
        """Regressor value at each panel date."""
        idx = panel.dates
        if self.name == "const":
            return pd.Series(1.0, index=idx)
        if self.name == "wed":
            s = pd.Series((idx.weekday == 2).astype(float), index=idx)
        elif self.name == "impvol":
            if panel.implied_vol is None or panel.implied_vol.isna().all():
                raise MissingImpliedVol("specification uses implied volatility but the panel has none")
            s = rolling_mean(panel.implied_vol.astype(float), self.window)
        else:
            s = np.sqrt(rolling_mean(panel[self.name].astype(float), self.window))
        return s.shift(self.lag)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    target: str
    horizon: int = 1
    regressors: Tuple[Term, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        terms = tuple(t if isinstance(t, Term) else Term.parse(t) for t in self.regressors)
        if Term("const") in terms[1:]:
            raise ConfigError("the intercept must be the first regressor")
        if not terms or terms[0] != Term("const"):
            terms = (Term("const"),) + terms
        if len(set(terms)) != len(terms):
            raise ConfigError(f"{self.name}: duplicate regressors")
        object.__setattr__(self, "regressors", terms)

    @property
    def labels(self) -> List[str]:
        return [t.label for t in self.regressors]

    @property
    def lookback(self) -> int:
        return max(t.lookback for t in self.regressors)

    @property
    def needs_implied_vol(self) -> bool:
        return any(t.name == "impvol" for t in self.regressors)

    def with_horizon(self, horizon: int) -> "ModelSpec":
        return replace(self, horizon=horizon)

    def with_wednesday(self) -> "ModelSpec":
        if Term("wed") in self.regressors:
            return self
        return replace(self, name=self.name + "W", regressors=self.regressors + (Term("wed"),))

    @classmethod
    def from_text(cls, text: str) -> "ModelSpec":
        """Parse ``key = value`` lines: name, target, horizon, regressors (comma separated)."""
        items = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            items[k.lower()] = v
        missing = {"name", "target", "regressors"} - set(items)
        if missing:
            raise ConfigError(f"model specification lacks {sorted(missing)}")
        return cls(
            name=items["name"],
            target=items["target"],
            horizon=int(items.get("horizon", 1)),
            regressors=tuple(Term.parse(t) for t in items["regressors"].split(",") if t.strip()),
        )

    @classmethod
    def read(cls, path) -> "ModelSpec":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return (
            f"name = {self.name}\n"
            f"target = {self.target}\n"
            f"horizon = {self.horizon}\n"
            f"regressors = {', '.join(str(t) for t in self.regressors)}\n"
        )


def _spec(name, target, terms):
    return ModelSpec(name, target, 1, tuple(Term.parse(t) for t in terms))


MODELS: Dict[str, ModelSpec] = {
    s.name: s
    for s in [
        _spec("LQR1", "return", ["const", "rv"]),
        _spec("LQR2", "return", ["const", "iv", "jv", "impvol"]),
        _spec("LQR3", "return", ["const", "rs_plus", "rs_minus", "impvol"]),
        _spec("HARQ1", "rv_sqrt", ["const", "rv", "rv[5]", "rv[22]"]),
        _spec("HARQ2", "rv_sqrt", ["const", "rs_plus", "rs_minus", "rv[5]", "rv[22]", "impvol"]),
        _spec("HARQ3", "rv_sqrt", ["const", "iv", "iv[5]", "iv[22]", "jv", "impvol"]),
    ]
}


def get_model(name: str, custom: Optional[Dict[str, ModelSpec]] = None) -> ModelSpec:
    available = {**MODELS, **(custom or {})}
    key = name.upper()
    if key.endswith("W") and key[:-1] in available:
        return available[key[:-1]].with_wednesday()
    if key not in available:
        raise ConfigError(f"unknown model {name!r}; available: {', '.join(sorted(available))}")
    return available[key]


def rolling_mean(series, k: int):
    """Trailing k-period mean; the first k-1 entries are NaN."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    is_series = isinstance(series, pd.Series)
    s = series if is_series else pd.Series(np.asarray(series, dtype=float))
    if len(s) < k:
        raise SeriesTooShort(f"series of length {len(s)} is shorter than window {k}")
    out = s.rolling(k, min_periods=k).mean()
    return out if is_series else out.to_numpy()


def direct_target(series, t: int, h: int, kind: str = "return") -> float:
    """Aggregate of the ``h`` values following position ``t``.

    Returns the sum for ``kind="return"`` and the square root of the sum for
    ``kind="rv_sqrt"``.
    """
    values = np.asarray(series, dtype=float)
    if h < 1 or t < 0 or t + h >= len(values):
        raise IndexOutOfRange(f"target window {t + 1}..{t + h} outside series of length {len(values)}")
    total = float(values[t + 1 : t + h + 1].sum())  # noqa: E203
    return np.sqrt(total) if kind == "rv_sqrt" else total


def direct_targets(series: pd.Series, h: int, kind: str = "return") -> pd.Series:
    """:func:`direct_target` at every position; NaN where the window runs past the end."""
    total = series.astype(float).rolling(h, min_periods=h).sum().shift(-h)
    return np.sqrt(total) if kind == "rv_sqrt" else total


@dataclass
class BuiltDataset:
    """A :class:`~quanteasy.qr.Dataset` together with its construction record.

    Attributes
    ----------
    features :
        Regressors and target at every panel date, NaN where unavailable.
    rows :
        Positions (in ``features``) of the usable rows.
    info_dates :
        For each usable row and regressor, the latest date whose data the value uses.
    target_dates :
        For each usable row, the first date the target depends on.
    """

    dataset: Dataset
    spec: ModelSpec
    features: pd.DataFrame
    rows: np.ndarray
    info_dates: np.ndarray
    target_dates: np.ndarray
    dropped_warmup: int = 0
    dropped_degenerate: int = 0

    @property
    def labels(self):
        return self.spec.labels

    def design_row(self, date) -> np.ndarray:
        """Regressor values at ``date``, usable as a forecast origin."""
        return self.features.loc[pd.Timestamp(date), self.labels].to_numpy(dtype=float)

    def to_frame(self) -> pd.DataFrame:
        out = pd.DataFrame(self.dataset.x, columns=self.labels, index=self.dataset.dates)
        out.insert(0, "target", self.dataset.y)
        return out

    def to_csv(self, path):
        from .util import write_csv

        out = self.to_frame()
        out.index = out.index.strftime("%Y-%m-%d")
        return write_csv(out.rename_axis("date"), path, index=True)


def build_features(panel: MeasurePanel, spec: ModelSpec, returns: Optional[pd.Series] = None) -> pd.DataFrame:
    """Regressor columns (by label) and the ``target`` column on the panel dates."""
    columns = {t.label: t.values(panel) for t in spec.regressors}
    if spec.target == "return":
        if returns is None:
            raise ValueError("return models need a daily return series")
        r = pd.Series(returns, dtype=float)
        r.index = pd.DatetimeIndex(r.index)
        base = r.reindex(panel.dates)
    else:
        base = panel["rv"].astype(float)
    columns["target"] = direct_targets(base, spec.horizon, spec.target)
    return pd.DataFrame(columns, index=panel.dates)


def _info_positions(spec: ModelSpec, n: int) -> np.ndarray:
    pos = np.arange(n)[:, None] - np.array([t.lag for t in spec.regressors])[None, :]
    return np.clip(pos, 0, n - 1)


def audit_no_lookahead(built: BuiltDataset):
    """Raise :class:`LookAheadError` unless every regressor predates the target."""
    latest = built.info_dates.max(axis=1)
    bad = np.flatnonzero(latest >= built.target_dates)
    if len(bad):
        i = bad[0]
        raise LookAheadError(
            f"{built.spec.name}: row {pd.Timestamp(built.dataset.dates[i]).date()} uses data from "
            f"{pd.Timestamp(latest[i]).date()}, target starts {pd.Timestamp(built.target_dates[i]).date()}"
        )


def _touches_degenerate(spec: ModelSpec, degenerate: np.ndarray) -> np.ndarray:
    """Rows whose own date, realized-measure windows or target window include a degenerate day."""
    deg = pd.Series(degenerate.astype(float))
    touched = degenerate.copy()
    for t in spec.regressors:
        if t.name in MEASURES:
            window = deg.rolling(t.window, min_periods=1).max().shift(t.lag)
            touched |= window.fillna(0.0).to_numpy() > 0
    target = deg.rolling(spec.horizon, min_periods=1).max().shift(-spec.horizon)
    touched |= target.fillna(0.0).to_numpy() > 0
    return touched


def build_dataset(panel: MeasurePanel, spec: ModelSpec, returns: Optional[pd.Series] = None) -> BuiltDataset:
    """Align regressors at date t with the target over t+1..t+h and drop unusable rows."""
    features = build_features(panel, spec, returns)
    n = len(features)
    labels = spec.labels
    jv_terms = [t.label for t in spec.regressors if t.name == "jv"]
    if jv_terms and (panel["jv"] == 0).all():
        logger.warning("%s: no jump days in the panel, JV regressors are all zero", spec.name)

    complete = features.notna().all(axis=1).to_numpy()
    degenerate = panel["degenerate"].astype(bool).to_numpy() if "degenerate" in panel.frame else np.zeros(n, bool)
    touched = _touches_degenerate(spec, degenerate)
    rows = np.flatnonzero(complete & ~touched)
    n_degenerate = int(np.sum(complete & touched))
    if n_degenerate:
        logger.warning("%s: excluded %d rows whose regressors or target use a degenerate day", spec.name, n_degenerate)
    if len(rows) <= len(labels):
        raise InsufficientHistory(f"{spec.name}: {len(rows)} usable rows for {len(labels)} regressors")

    dates = panel.dates.to_numpy()
    info = dates[_info_positions(spec, n)[rows]]
    target_dates = dates[np.minimum(rows + 1, n - 1)]
    built = BuiltDataset(
        dataset=Dataset(
            features["target"].to_numpy()[rows],
            features[labels].to_numpy(dtype=float)[rows],
            labels,
            panel.dates[rows],
        ),
        spec=spec,
        features=features,
        rows=rows,
        info_dates=info,
        target_dates=target_dates,
        dropped_warmup=int(n - np.sum(complete)),
        dropped_degenerate=n_degenerate,
    )
    audit_no_lookahead(built)
    return built


def build_return_dataset(panel: MeasurePanel, returns: pd.Series, spec: ModelSpec) -> BuiltDataset:
    if spec.target != "return":
        raise ConfigError(f"{spec.name} is not a return model")
    return build_dataset(panel, spec, returns)


def build_rv_dataset(panel: MeasurePanel, spec: ModelSpec) -> BuiltDataset:
    if spec.target != "rv_sqrt":
        raise ConfigError(f"{spec.name} is not a realized volatility model")
    return build_dataset(panel, spec)
