# -*- coding: utf-8 -*-

"""SVG charts of quantile processes and backtest reports.

Output is deterministic: a fixed ``svg.hashsalt`` and no date in the metadata
make reruns byte-identical.
"""
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from scipy import stats  # noqa: E402

logger = logging.getLogger(__name__)

__all__ = ["Chart", "QuantileProcessChart", "CoverageBars", "LossBars", "save_svg"]

RC = {
    "svg.hashsalt": "quanteasy",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}


def save_svg(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(RC):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


class Chart(object):
    def __init__(self, title=None, width=6.0, height=4.0):
        self.title = title
        self.width = width
        self.height = height

    def figure(self):
        with plt.rc_context(RC):
            fig, axes = self.subplots()
            self.draw(fig, axes)
            if self.title:
                fig.suptitle(self.title)
        return fig

    def subplots(self):
        return plt.subplots(figsize=(self.width, self.height))

    def draw(self, fig, axes):
        raise NotImplementedError()

    def save(self, path) -> Path:
        return save_svg(self.figure(), path)


class QuantileProcessChart(Chart):
    """One panel per regressor: the coefficient against alpha with pointwise 95% bootstrap bands."""

    def __init__(self, process, title=None, level=0.95):
        self.table = process.coefficient_table()
        self.terms = list(dict.fromkeys(self.table["term"]))
        ncols = min(3, len(self.terms))
        nrows = int(np.ceil(len(self.terms) / ncols))
        super(QuantileProcessChart, self).__init__(title, width=3.0 * ncols, height=2.4 * nrows)
        self.ncols, self.nrows = ncols, nrows
        self.z = stats.norm.ppf(0.5 + level / 2.0)

    def subplots(self):
        return plt.subplots(self.nrows, self.ncols, figsize=(self.width, self.height), squeeze=False)

    def draw(self, fig, axes):
        flat = axes.ravel()
        for ax, term in zip(flat, self.terms):
            t = self.table[self.table["term"] == term]
            ax.plot(t["alpha"], t["beta"], color="C0", marker="o", markersize=3)
            if "std_error" in t:
                band = self.z * t["std_error"]
                ax.fill_between(t["alpha"], t["beta"] - band, t["beta"] + band, color="C0", alpha=0.25, linewidth=0)
            ax.axhline(0.0, color="0.5", linewidth=0.6)
            ax.set_title(term)
            ax.set_xlabel("alpha")
        for ax in flat[len(self.terms):]:
            ax.set_visible(False)
        fig.tight_layout()


class CoverageBars(Chart):
    """Grouped bars of a report column per model, one group per (alpha, horizon) cell."""

    field = "coverage"

    def __init__(self, report: pd.DataFrame, title=None, horizon=None):
        table = report if horizon is None else report[report["horizon"] == horizon]
        self.table = table
        self.models = list(dict.fromkeys(table["model"]))
        self.cells = list(dict.fromkeys(zip(table["alpha"], table["horizon"])))
        super(CoverageBars, self).__init__(title, width=max(4.0, 0.9 * len(self.cells) + 2.0), height=3.5)

    def values(self, model):
        t = self.table[self.table["model"] == model].set_index(["alpha", "horizon"])
        return np.array([t[self.field].get(cell, np.nan) for cell in self.cells], dtype=float)

    def reference(self, ax, x, width):
        for i, (a, _) in enumerate(self.cells):
            ax.hlines(a, x[i] - 0.45, x[i] + 0.45, color="k", linewidth=1.0)

    def draw(self, fig, axes):
        ax = axes
        x = np.arange(len(self.cells))
        width = 0.8 / max(1, len(self.models))
        for j, model in enumerate(self.models):
            ax.bar(x - 0.4 + (j + 0.5) * width, self.values(model), width, label=model)
        self.reference(ax, x, width)
        ax.set_xticks(x)
        ax.set_xticklabels([f"{a:g}\nh={h}" for a, h in self.cells])
        ax.set_ylabel(self.field.replace("_", " "))
        ax.legend(fontsize=7, ncol=2, frameon=False)
        fig.tight_layout()


class LossBars(CoverageBars):
    field = "tick_loss"

    def reference(self, ax, x, width):
        pass
