#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the synthetic data generators."""
import numpy as np
import pandas as pd
import pytest

from quanteasy.simulate import (
    brownian_days,
    flat_smile_quotes,
    location_scale_quantile,
    simulate_location_scale,
    simulate_panel,
    simulate_sav,
    write_synthetic_dataset,
)


def test_brownian_days_scale():
    r = brownian_days(2000, 78, sigma2=4.0, seed=0)
    assert r.shape == (2000, 78)
    assert (r ** 2).sum(axis=1).mean() == pytest.approx(4.0, rel=0.02)


def test_panel_is_reproducible(sim_panel):
    panel, returns, variance = sim_panel
    assert len(panel) == len(returns) == len(variance) == 800
    assert panel.dates.equals(returns.index)
    assert panel.implied_vol.notna().all()
    again = simulate_panel(n_days=800, seed=1)[0]
    pd.testing.assert_frame_equal(panel.frame, again.frame)


def test_location_scale_quantile():
    data = simulate_location_scale(20000, seed=1, a=0.5, b=0.2)
    for alpha in (0.1, 0.9):
        q = location_scale_quantile(data["v"], alpha, a=0.5, b=0.2)
        assert np.mean(data["y"] <= q) == pytest.approx(alpha, abs=0.01)


def test_sav_quantile_path():
    r, q, theta = simulate_sav(20000, alpha=0.05, seed=2)
    assert np.mean(r <= q) == pytest.approx(0.05, abs=0.006)
    np.testing.assert_allclose(q[1:], theta[0] + theta[1] * q[:-1] + theta[2] * np.abs(r[:-1]), rtol=1e-10)


def test_flat_smile_quotes_are_out_of_the_money():
    quotes = flat_smile_quotes("2020-03-02", expiry_days=(20,), futures_price=100.0)
    assert all(q.price >= 0.05 for q in quotes)
    assert all(q.is_call == (q.strike >= 100.0) for q in quotes)
    assert {q.days for q in quotes} == {20}


def test_write_synthetic_dataset(tmp_path, spec):
    paths = write_synthetic_dataset(tmp_path, n_days=10, seed=4, spec=spec, quote_days=2)
    assert sorted(paths) == ["implied_vol", "quotes", "ticks"]
    ticks = pd.read_csv(paths["ticks"])
    assert list(ticks.columns) == ["timestamp", "price"]
    assert len(ticks) == 10 * 400
    quotes = pd.read_csv(paths["quotes"])
    assert quotes["date"].nunique() == 2
