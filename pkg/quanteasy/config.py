# -*- coding: utf-8 -*-

"""Run configuration read from an INI file.

Example::

    [paths]
    ticks = data/ticks.csv
    output = out

    [models]
    returns = LQR1, LQR2, LQR3
    model.MYHAR = rv_sqrt: rv, rv[5], rv[22], jv

    [forecast]
    alphas = 0.05, 0.1, 0.5, 0.9, 0.95
    horizons = 1, 5, 10

Every key has a default; :meth:`RunConfig.write` records the resolved values.
"""
import configparser
import datetime
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .arfima import MIN_TRUNCATION
from .errors import ConfigError
from .ingest import SessionSpec
from .models import ModelSpec, Term, get_model
from .qr import BootstrapConfig

logger = logging.getLogger(__name__)

__all__ = ["RunConfig", "load_config"]

SECTIONS = (
    "paths",
    "session",
    "measures",
    "models",
    "forecast",
    "bootstrap",
    "caviar",
    "arfima",
    "evaluation",
    "impvol",
    "seeds",
)


def _floats(text) -> List[float]:
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _ints(text) -> List[int]:
    return [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _names(text) -> List[str]:
    return [v.strip() for v in str(text).replace(";", ",").split(",") if v.strip()]


def _time(text) -> datetime.time:
    try:
        return datetime.datetime.strptime(str(text).strip(), "%H:%M").time()
    except ValueError:
        raise ConfigError(f"expected HH:MM, got {text!r}")


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    # [paths]
    ticks: Optional[str] = None
    quotes: Optional[str] = None
    rates: Optional[str] = None
    implied_vol: Optional[str] = None
    panel: Optional[str] = None
    returns: Optional[str] = None
    output: str = "out"
    # [session]
    open: datetime.time = datetime.time(9, 30)
    close: datetime.time = datetime.time(16, 0)
    bar_minutes: int = 5
    min_ticks: int = 50
    excluded_dates: List[str] = field(default_factory=list)
    timestamp_col: str = "timestamp"
    price_col: str = "price"
    timestamp_format: Optional[str] = None
    on_malformed: str = "raise"
    # [measures]
    significance: float = 0.001
    # [models]
    return_models: List[str] = field(default_factory=lambda: ["LQR1", "LQR2", "LQR3"])
    rv_models: List[str] = field(default_factory=lambda: ["HARQ1", "HARQ2", "HARQ3"])
    caviar_models: List[str] = field(default_factory=lambda: ["SAV", "AS", "RSAV1", "RSAV2", "RAS"])
    custom_models: Dict[str, ModelSpec] = field(default_factory=dict)
    # [forecast]
    alphas: List[float] = field(default_factory=lambda: [0.05, 0.1, 0.5, 0.9, 0.95])
    horizons: List[int] = field(default_factory=lambda: [1, 5, 10])
    window: Optional[int] = None
    n_oos: int = 500
    refit_every: int = 1
    benchmark_returns: str = "LQR2"
    benchmark_rv: str = "HARQ3"
    # [bootstrap]
    replications: int = 999
    block_length: Optional[int] = None
    # [caviar]
    caviar_draws: int = 10_000
    caviar_polish: int = 10
    caviar_refit_every: int = 20
    exog_timing: str = "current"
    # [arfima]
    truncation: int = 1000
    arfima_draws: int = 10_000
    estimate_ma: bool = False
    arfima_refit_every: int = 20
    # [evaluation]
    dq_lags: int = 5
    mc_reps: int = 9999
    # [impvol]
    grid_points: int = 2001
    n_std: float = 10.0
    min_days: int = 10
    price_floor: float = 0.05
    target_days: int = 30
    single_expiry: bool = False
    # [seeds]
    seed: int = 0

    source: Optional[str] = None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(path)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}")
        cfg = cls.from_parser(parser)
        cfg.source = str(path)
        return cfg

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> "RunConfig":
        unknown = set(parser.sections()) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        cfg = cls()
        for section, key, attr, conv in _SCHEMA:
            if parser.has_option(section, key):
                raw = parser.get(section, key).strip()
                try:
                    value = conv(raw) if raw != "" else None
                except (ValueError, TypeError) as e:
                    raise ConfigError(f"[{section}] {key} = {raw!r}: {e}")
                if value is not None or attr in _OPTIONAL:
                    setattr(cfg, attr, value)
        if parser.has_section("models"):
            for key, value in parser.items("models"):
                if not key.lower().startswith("model."):
                    continue
                name = key.split(".", 1)[1].upper()
                if ":" not in value:
                    raise ConfigError(f"[models] {key}: expected 'target: term, term, ...'")
                target, terms = value.split(":", 1)
                regressors = tuple(Term.parse(t) for t in _names(terms))
                cfg.custom_models[name] = ModelSpec(name, target.strip(), 1, regressors)
        known = {(s, k) for s, k, _, _ in _SCHEMA}
        for section in parser.sections():
            for key in parser.options(section):
                if (section, key) not in known and not (section == "models" and key.lower().startswith("model.")):
                    raise ConfigError(f"unknown key [{section}] {key}")
        return cfg

    def validate(self, require=()) -> "RunConfig":
        """Check values and that every configured input file exists.

        ``require`` names path keys that must be set, e.g. ``("ticks",)``.
        """
        for key in require:
            if getattr(self, key) is None:
                raise ConfigError(f"[paths] {key} is required for this command")
        for key in ("ticks", "quotes", "rates", "implied_vol", "panel", "returns"):
            value = getattr(self, key)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"[paths] {key}: {value} does not exist")
        a = np.asarray(self.alphas, dtype=float)
        if len(a) == 0 or np.any(a <= 0) or np.any(a >= 1) or np.any(np.diff(a) <= 0):
            raise ConfigError(f"alphas must be strictly increasing inside (0, 1), got {self.alphas}")
        if not self.horizons or min(self.horizons) < 1:
            raise ConfigError(f"horizons must be positive, got {self.horizons}")
        if self.exog_timing not in ("current", "lagged"):
            raise ConfigError(f"exog_timing must be current or lagged, got {self.exog_timing!r}")
        if self.on_malformed not in ("raise", "skip"):
            raise ConfigError(f"on_malformed must be raise or skip, got {self.on_malformed!r}")
        if self.truncation < MIN_TRUNCATION:
            raise ConfigError(f"[arfima] truncation must be at least {MIN_TRUNCATION}, got {self.truncation}")
        for name in self.return_models + self.rv_models + [self.benchmark_returns, self.benchmark_rv]:
            get_model(name, self.custom_models)
        try:
            self.session_spec()
            self.bootstrap_config()
        except ValueError as e:
            raise ConfigError(str(e))
        return self

    def session_spec(self) -> SessionSpec:
        return SessionSpec(
            open_time=self.open,
            close_time=self.close,
            bar_interval=f"{self.bar_minutes}min",
            excluded_dates=frozenset(self.excluded_dates),
            min_ticks=self.min_ticks,
        )

    def tick_schema(self) -> dict:
        return {"timestamp": self.timestamp_col, "price": self.price_col, "format": self.timestamp_format}

    def bootstrap_config(self, seed: Optional[int] = None) -> BootstrapConfig:
        return BootstrapConfig(self.replications, self.block_length, self.seed if seed is None else seed)

    def to_parser(self) -> configparser.ConfigParser:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section in SECTIONS:
            parser.add_section(section)
        for section, key, attr, _ in _SCHEMA:
            parser.set(section, key, _format(getattr(self, attr)))
        for name, spec in sorted(self.custom_models.items()):
            terms = ", ".join(str(t) for t in spec.regressors)
            parser.set("models", f"model.{name}", f"{spec.target}: {terms}")
        return parser

    def write(self, path) -> Path:
        """Write the effective configuration, defaults resolved."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            self.to_parser().write(f)
        return path

    def __str__(self):
        return ", ".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self) if f.name != "custom_models")


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, datetime.time):
        return value.strftime("%H:%M")
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


_OPTIONAL = {
    "ticks", "quotes", "rates", "implied_vol", "panel", "returns", "timestamp_format", "window", "block_length"
}

_SCHEMA = [
    ("paths", "ticks", "ticks", str),
    ("paths", "quotes", "quotes", str),
    ("paths", "rates", "rates", str),
    ("paths", "implied_vol", "implied_vol", str),
    ("paths", "panel", "panel", str),
    ("paths", "returns", "returns", str),
    ("paths", "output", "output", str),
    ("session", "open", "open", _time),
    ("session", "close", "close", _time),
    ("session", "bar_minutes", "bar_minutes", int),
    ("session", "min_ticks", "min_ticks", int),
    ("session", "excluded_dates", "excluded_dates", _names),
    ("session", "timestamp_col", "timestamp_col", str),
    ("session", "price_col", "price_col", str),
    ("session", "timestamp_format", "timestamp_format", str),
    ("session", "on_malformed", "on_malformed", str),
    ("measures", "significance", "significance", float),
    ("models", "returns", "return_models", _names),
    ("models", "rv", "rv_models", _names),
    ("models", "caviar", "caviar_models", _names),
    ("forecast", "alphas", "alphas", _floats),
    ("forecast", "horizons", "horizons", _ints),
    ("forecast", "window", "window", int),
    ("forecast", "n_oos", "n_oos", int),
    ("forecast", "refit_every", "refit_every", int),
    ("forecast", "benchmark_returns", "benchmark_returns", str),
    ("forecast", "benchmark_rv", "benchmark_rv", str),
    ("bootstrap", "replications", "replications", int),
    ("bootstrap", "block_length", "block_length", int),
    ("caviar", "n_draws", "caviar_draws", int),
    ("caviar", "n_polish", "caviar_polish", int),
    ("caviar", "refit_every", "caviar_refit_every", int),
    ("caviar", "exog_timing", "exog_timing", str),
    ("arfima", "truncation", "truncation", int),
    ("arfima", "n_draws", "arfima_draws", int),
    ("arfima", "estimate_ma", "estimate_ma", _bool),
    ("arfima", "refit_every", "arfima_refit_every", int),
    ("evaluation", "dq_lags", "dq_lags", int),
    ("evaluation", "mc_reps", "mc_reps", int),
    ("impvol", "grid_points", "grid_points", int),
    ("impvol", "n_std", "n_std", float),
    ("impvol", "min_days", "min_days", int),
    ("impvol", "price_floor", "price_floor", float),
    ("impvol", "target_days", "target_days", int),
    ("impvol", "single_expiry", "single_expiry", _bool),
    ("seeds", "base", "seed", int),
]


def load_config(path=None) -> RunConfig:
    """Configuration from ``path``, or the defaults when no file is given."""
    return RunConfig() if path is None else RunConfig.from_file(path)
