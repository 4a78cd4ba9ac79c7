import json
import logging
import math
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class Progbar(object):
    """Single-line progress bar on stderr for a loop of ``target`` steps."""

    def __init__(self, target: int, width: int = 30, interval: float = 0.1, stream=None):
        self.target = max(int(target), 1)
        self.width = width
        self.interval = interval
        self.stream = stream or sys.stderr
        self._start = self._last = time.time()

    def update(self, current: int):
        now = time.time()
        done = current >= self.target
        if not done and now - self._last < self.interval:
            return
        filled = self.width * min(current, self.target) // self.target
        elapsed = now - self._start
        if done:
            tail = format_time(elapsed)
        else:
            tail = "ETA " + format_time(elapsed / current * (self.target - current) if current else 0)
        self.stream.write(f"\r{current}/{self.target} [{'#' * filled}{'.' * (self.width - filled)}] {tail}")
        if done:
            self.stream.write("\n")
        self.stream.flush()
        self._last = now


def progress(iterable, total=None, progbar=True):
    """Iterate while advancing a :class:`Progbar` (a no-op when ``progbar`` is false)."""
    if not progbar:
        yield from iterable
        return
    pbar = Progbar(total if total is not None else len(iterable))
    for i, x in enumerate(iterable, 1):
        yield x
        pbar.update(i)


def format_time(eta):
    if eta > 3600:
        eta_format = "%d:%02d:%02d" % (eta // 3600, (eta % 3600) // 60, eta % 60)
    elif eta > 60:
        eta_format = "%d:%02d" % (eta // 60, eta % 60)
    else:
        eta_format = "%ds" % eta
    return eta_format


def format_time_ns(eta):
    if eta > 10e9:
        eta_format = format_time(eta // 1e9)
    elif eta > 1e9:
        eta_format = "%.1fs" % (eta / 1e9)
    elif eta > 10e6:
        eta_format = "%dms" % (eta / 1e6)
    elif eta > 1e6:
        eta_format = "%.1fms" % (eta / 1e6)
    else:
        eta_format = "%.1fus" % (eta / 1e3)
    return eta_format


class Tictoc(object):
    """Nested stopwatch. With ``additive=True`` durations are summed per name."""

    def __init__(self, output="log", additive=False):
        self.stack = []
        self.output = output
        self._summarizer = defaultdict(int) if additive else False

    def tic(self, name):
        if self._summarizer is not False:
            self._summarizer[name]
        self.stack.append((name, time.perf_counter_ns()))

    def toc(self):
        stop = time.perf_counter_ns()
        name, start = self.stack.pop()
        dur = stop - start
        if self.output == "log":
            logger.debug("%s: %s", name, format_time_ns(dur))
        if self._summarizer is not False:
            self._summarizer[name] += dur
        return dur

    def summary(self):
        """Accumulated durations as ``{name: seconds}``."""
        if len(self.stack):
            logger.warning("Tictoc stack is not empty but has %d items", len(self.stack))
        if self._summarizer is False:
            return {}
        for k, v in self._summarizer.items():
            logger.debug("%s: %s", k, format_time_ns(v))
        return {k: v / 1e9 for k, v in self._summarizer.items()}


def to_jsonable(x):
    """Recursively convert numpy / pandas values so ``json.dumps`` accepts them.

    NaN and infinities become ``None``.
    """
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (pd.Timestamp,)):
        return x.strftime("%Y-%m-%d")
    if hasattr(x, "isoformat"):
        return x.isoformat()
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_csv(df: pd.DataFrame, path, index=False):
    """Write with a fixed float format so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=index, float_format="%.10g", lineterminator="\n")
    return path


def stream_seed(*keys) -> int:
    """A seed for the random stream named by ``keys``, independent of every other key tuple."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def setup_logging(verbosity=0):
    """Configure the root logger for command-line use: -1 quiet, 0 info, 1 debug."""
    level = {-1: logging.WARNING, 0: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
