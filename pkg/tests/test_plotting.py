#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the SVG charts."""
import numpy as np
import pandas as pd

from quanteasy.plotting import CoverageBars, LossBars, QuantileProcessChart
from quanteasy.qr import BootstrapConfig, Dataset, quantile_process


def _report():
    rows = []
    for model in ("LQR1", "LQR2"):
        for a in (0.05, 0.95):
            for h in (1, 5):
                rows.append({"model": model, "alpha": a, "horizon": h, "coverage": a + 0.01, "tick_loss": 0.1})
    return pd.DataFrame(rows)


def test_coverage_bars(tmp_path):
    chart = CoverageBars(_report(), title="coverage", horizon=1)
    assert chart.cells == [(0.05, 1), (0.95, 1)]
    np.testing.assert_allclose(chart.values("LQR1"), [0.06, 0.96])
    path = chart.save(tmp_path / "coverage.svg")
    assert path.read_text().lstrip().startswith("<?xml")


def test_svg_is_reproducible(tmp_path):
    a = LossBars(_report(), title="tick loss").save(tmp_path / "a.svg").read_bytes()
    b = LossBars(_report(), title="tick loss").save(tmp_path / "b.svg").read_bytes()
    assert a == b


def test_quantile_process_chart(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 2.0, 300)
    data = Dataset(1.0 + x + rng.standard_normal(300), np.column_stack([np.ones(300), x]), ["const", "x"])
    process = quantile_process(data, [0.25, 0.5, 0.75], bootstrap=BootstrapConfig(100, seed=1))
    chart = QuantileProcessChart(process, title="process")
    assert chart.terms == ["const", "x"]
    assert (chart.nrows, chart.ncols) == (1, 2)
    assert chart.save(tmp_path / "process.svg").stat().st_size > 0
