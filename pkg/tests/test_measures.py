#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for realized measures and the jump test."""
import logging

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from quanteasy.errors import DegenerateDay, EmptyDay
from quanteasy.measures import (
    MEDRV_CONST,
    DailyMeasures,
    MeasurePanel,
    compute_daily_measures,
    decompose_iv_jv,
    jump_test_z,
    med_rq,
    med_rv,
    realized_semivariances,
    realized_variance,
    summary_statistics,
)
from quanteasy.simulate import brownian_days


def test_realized_variance():
    assert realized_variance([0.01, -0.02, 0.005]) == pytest.approx(0.000525)
    assert realized_variance([0.0, 0.0, 0.0]) == 0
    assert realized_variance([0.3]) == pytest.approx(0.09)
    with pytest.raises(EmptyDay):
        realized_variance([])


def test_semivariances():
    assert realized_semivariances([0.01, -0.02]) == pytest.approx((0.0004, 0.0001))
    rs_minus, rs_plus = realized_semivariances([0.1, 0.2])
    assert rs_minus == 0 and rs_plus == pytest.approx(realized_variance([0.1, 0.2]))
    assert realized_semivariances([0.0, 0.0]) == (0, 0)


def test_medrv_constant_returns():
    assert med_rv([0.01] * 4) == pytest.approx(MEDRV_CONST * 2 * 2e-4)
    assert med_rv([0.01] * 4) == pytest.approx(5.67703e-4, rel=1e-3)
    assert med_rv(np.zeros(10)) == 0
    assert med_rq(np.zeros(10)) == 0


def test_medrv_ignores_a_spike():
    r = np.full(78, 0.1) * np.where(np.arange(78) % 2, 1, -1)
    r[40] = 10.0
    assert med_rv(r) < 0.02 * realized_variance(r)


def test_medrq_homogeneity():
    r = np.random.default_rng(0).standard_normal(50)
    assert med_rq(3.0 * r) == pytest.approx(81.0 * med_rq(r))


def test_two_dimensional_input_is_per_day():
    r = brownian_days(3, 78, seed=2)
    np.testing.assert_allclose(med_rv(r), [med_rv(row) for row in r])
    np.testing.assert_allclose(realized_variance(r), (r ** 2).sum(axis=1))


def test_medrq_brownian_mean():
    r = brownian_days(4000, 390, sigma2=1.0, seed=5)
    assert med_rq(r).mean() == pytest.approx(1.0, rel=0.03)


def test_jump_z_zero_when_medrv_equals_rv():
    assert jump_test_z(1.0, 1.0, 1.0, 78) == 0
    with pytest.raises(DegenerateDay):
        jump_test_z(0.0, 1.0, 1.0, 78)


def _measures(z, rv=2.0, medrv=1.5):
    return DailyMeasures(pd.Timestamp("2020-01-08"), rv, medrv, 1.0, 1.0, 1.0, z, False, rv, 0.0, 78)


def test_decompose_shrinkage_rule(caplog):
    assert decompose_iv_jv(_measures(0.5)) == (2.0, 0.0, False)
    iv, jv, flag = decompose_iv_jv(_measures(5.0))
    assert (iv, jv, flag) == (1.5, 0.5, True)
    with caplog.at_level(logging.WARNING):
        assert decompose_iv_jv(_measures(5.0, rv=1.0, medrv=1.2)) == (1.0, 0.0, True)
    assert "clamped" in caplog.text


def test_daily_measures_invariants():
    r = brownian_days(50, 78, sigma2=1.0, seed=7, jump_size=6.0)
    for row in r:
        m = compute_daily_measures(row)
        assert m.iv + m.jv == pytest.approx(m.rv)
        assert m.rs_minus + m.rs_plus == pytest.approx(m.rv)
        assert m.jv >= 0


def test_zero_day_is_degenerate():
    m = compute_daily_measures(np.zeros(78))
    assert m.degenerate and not m.jump_flag and m.jv == 0


def _rejections(n_days, seed, jump_size=0.0, chunk=10_000):
    critical = stats.norm.ppf(0.999)
    rejected = 0
    for i, start in enumerate(range(0, n_days, chunk)):
        r = brownian_days(min(chunk, n_days - start), 390, seed=seed + i, jump_size=jump_size)
        z = jump_test_z(realized_variance(r), med_rv(r), med_rq(r), 390)
        rejected += int(np.sum(z > critical))
    return rejected / n_days


@pytest.mark.slow
def test_jump_test_size():
    assert 0.0005 <= _rejections(100_000, seed=11) <= 0.002


def test_jump_test_power():
    # a jump of one daily standard deviation, about 20 times the bar standard deviation
    assert _rejections(2_000, seed=13, jump_size=1.0) >= 0.99


@pytest.mark.slow
def test_medrv_bias_and_rv_error_rate():
    r390 = brownian_days(10_000, 390, seed=17)
    assert abs(med_rv(r390).mean() - 1.0) < 0.01
    r1560 = brownian_days(5_000, 1560, seed=19)
    rmse_390 = np.sqrt(np.mean((realized_variance(r390) - 1.0) ** 2))
    rmse_1560 = np.sqrt(np.mean((realized_variance(r1560) - 1.0) ** 2))
    assert 0.35 <= rmse_1560 / rmse_390 <= 0.65


def test_panel_csv_round_trip(tmp_path, sim_panel):
    panel = MeasurePanel(sim_panel[0].frame.iloc[:20])
    path = panel.to_csv(tmp_path / "panel.csv")
    back = MeasurePanel.read_csv(path)
    pd.testing.assert_index_equal(back.dates, panel.dates)
    np.testing.assert_allclose(back["rv"], panel["rv"], rtol=1e-9)
    assert back["jump_flag"].dtype == bool


def test_panel_rejects_unsorted_dates(sim_panel):
    frame = sim_panel[0].frame.iloc[:5]
    with pytest.raises(ValueError):
        MeasurePanel(frame.iloc[::-1])


def test_with_implied_vol_aligns_by_date(sim_panel, caplog):
    panel = MeasurePanel(sim_panel[0].frame.iloc[:10].drop(columns="implied_vol"))
    iv = pd.Series(np.arange(8.0), index=panel.dates[2:])
    with caplog.at_level(logging.WARNING):
        out = panel.with_implied_vol(iv)
    assert out.implied_vol.isna().sum() == 2
    assert out.implied_vol.iloc[2] == 0.0


def test_summary_statistics(sim_panel):
    panel, returns, _ = sim_panel
    table = summary_statistics(panel, returns)
    assert {"return", "rv", "rs_minus", "rs_plus", "medrv", "iv", "jv", "implied_vol"} <= set(table.index)
    assert "ljung_box_20" in table.columns
    # log RV is long-memory, so RV is strongly autocorrelated
    assert table.loc["rv", "ljung_box_20"] > table.loc["return", "ljung_box_20"]
    assert 0 < table.attrs["jump_day_share"] < 0.2
    assert 0 <= table.attrs["jump_qv_share"] < 1
