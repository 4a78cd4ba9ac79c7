#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the rolling backtest and the in-sample report."""
import json

import numpy as np
import pandas as pd
import pytest

from quanteasy.errors import InsufficientHistory
from quanteasy.measures import MeasurePanel
from quanteasy.models import MODELS, ModelSpec
from quanteasy.pipeline import (
    ArfimaForecaster,
    Backtest,
    CaviarForecaster,
    LinearQuantileForecaster,
    in_sample_report,
    rolling_forecast_eval,
)

ALPHAS = [0.05, 0.5]


def _stages():
    copy = ModelSpec("LQR2COPY", "return", 1, MODELS["LQR2"].regressors)
    return [
        LinearQuantileForecaster("LQR1", refit_every=10),
        LinearQuantileForecaster("LQR2", refit_every=10),
        LinearQuantileForecaster(copy, refit_every=10),
    ]


def _run(sim_panel, seed=0):
    panel, returns, _ = sim_panel
    return rolling_forecast_eval(
        _stages(), panel, returns, "return", ALPHAS, [1, 5], n_oos=120, benchmark="LQR2", mc_reps=19, seed=seed
    )


@pytest.fixture(scope="module")
def report(sim_panel):
    return _run(sim_panel)


def test_report_layout(report):
    table = report.table
    assert len(table) == 3 * len(ALPHAS) * 2
    assert set(table["model"]) == {"LQR1", "LQR2", "LQR2COPY"}
    assert (table["n"] == 120).all()
    one_step = table["horizon"] == 1
    assert table.loc[one_step, "dq_p_mc"].notna().all()
    assert table.loc[~one_step, "dq_p_mc"].isna().all()
    assert len(report.forecasts) == 3 * len(ALPHAS) * 2 * 120


def test_benchmark_columns(report):
    table = report.table.set_index(["model", "alpha", "horizon"])
    assert (table.xs("LQR2", level="model")["dm_note"] == "benchmark").all()
    # identical forecasts leave nothing to compare
    assert (table.xs("LQR2COPY", level="model")["dm_note"] == "degenerate").all()
    assert table.xs("LQR1", level="model")["dm_stat"].notna().all()


def test_forecasts_are_ordered(report):
    f = report.forecasts
    median = f[(f["alpha"] == 0.5) & (f["model"] == "LQR1")]["q"].to_numpy()
    tail = f[(f["alpha"] == 0.05) & (f["model"] == "LQR1")]["q"].to_numpy()
    assert np.all(tail < median)


def test_report_is_deterministic(sim_panel, report):
    again = _run(sim_panel)
    pd.testing.assert_frame_equal(report.table, again.table)
    pd.testing.assert_frame_equal(report.forecasts, again.forecasts)


def test_report_files(report, tmp_path):
    paths = report.to_csv(tmp_path)
    assert [p.name for p in paths] == ["report.csv", "forecasts.csv"]
    data = json.loads(report.to_json(tmp_path / "report.json").read_text())
    assert data["benchmark"] == "LQR2"
    assert len(data["rows"]) == len(report.table)


def test_no_lookahead_in_windows(sim_panel):
    panel, returns, _ = sim_panel
    bt = Backtest(panel, returns, n_oos=120, horizons=[1, 5])
    for h in (1, 5):
        origins = bt.origins(h)
        assert origins[-1] + h == len(panel) - 1
        for t in origins[[0, -1]]:
            train = bt.training_positions(t, h)
            assert train[-1] + h <= t
            assert len(train) <= bt.window


def test_window_checks(sim_panel):
    panel, returns, _ = sim_panel
    with pytest.raises(InsufficientHistory):
        Backtest(panel, returns, n_oos=120, window=10_000)
    with pytest.raises(InsufficientHistory):
        Backtest(MeasurePanel(panel.frame.iloc[:150]), returns, n_oos=120)
    with pytest.raises(ValueError):
        Backtest(panel, None, target="return")


def test_stage_checks(sim_panel):
    panel, returns, _ = sim_panel
    bt = Backtest(panel, returns, n_oos=120)
    with pytest.raises(ValueError):
        bt += LinearQuantileForecaster("HARQ1")
    with pytest.raises(ValueError):
        bt.run()
    bt_rv = Backtest(panel, target="rv_sqrt", n_oos=120)
    with pytest.raises(ValueError):
        bt_rv += CaviarForecaster("SAV")


def test_caviar_and_arfima_stages(sim_panel):
    panel, returns, _ = sim_panel
    report = rolling_forecast_eval(
        [
            CaviarForecaster("SAV", refit_every=60, n_draws=100, n_polish=1),
            ArfimaForecaster(refit_every=200, n_draws=200, truncation=100),
        ],
        panel,
        returns,
        alphas=[0.05],
        horizons=[1],
        n_oos=120,
        mc_reps=19,
    )
    table = report.table.set_index("model")
    assert list(table.index) == ["SAV", "ARFIMA"]
    assert report.forecasts["q"].notna().all()
    assert (report.forecasts["q"] < 0).all()
    assert "dm_stat" not in report.table


def test_rv_backtest(sim_panel):
    panel, _, _ = sim_panel
    report = rolling_forecast_eval(
        [LinearQuantileForecaster("HARQ1", refit_every=20), LinearQuantileForecaster("HARQ3", refit_every=20)],
        panel,
        target="rv_sqrt",
        alphas=[0.1, 0.9],
        horizons=[1],
        n_oos=120,
        benchmark="HARQ3",
        mc_reps=19,
    )
    assert (report.forecasts["observed"] > 0).all()
    cov = report.table.set_index("alpha")["coverage"]
    assert np.all(cov.loc[0.1].to_numpy() < cov.loc[0.9].to_numpy())


def test_in_sample_report(sim_panel):
    panel, returns, _ = sim_panel
    table = in_sample_report(panel, returns, ["LQR1", "SAV"], [0.05], mc_reps=19, caviar_draws=100)
    assert table["model"].tolist() == ["LQR1", "SAV"]
    assert np.allclose(table["coverage"], 0.05, atol=0.02)
    assert table["dq_p_mc"].between(0, 1).all()


@pytest.mark.slow
def test_out_of_sample_calibration(sim_panel):
    panel, returns, _ = sim_panel
    report = rolling_forecast_eval(
        [LinearQuantileForecaster("LQR1")], panel, returns, alphas=[0.05, 0.95], horizons=[1], n_oos=300, mc_reps=99
    )
    cov = report.table.set_index("alpha")["coverage"]
    assert cov.loc[0.05] == pytest.approx(0.05, abs=0.035)
    assert cov.loc[0.95] == pytest.approx(0.95, abs=0.035)


def test_in_sample_report_rv_model(sim_panel):
    panel, _, _ = sim_panel
    table = in_sample_report(panel, None, ["HARQ1"], [0.05, 0.5], mc_reps=19)
    assert table["model"].tolist() == ["HARQ1", "HARQ1"]
    assert np.allclose(table["coverage"], [0.05, 0.5], atol=0.03)
    assert table["dq_p_mc"].between(0, 1).all()
