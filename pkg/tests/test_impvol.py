#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for option pricing, smile construction and the 30-day implied volatility index."""
import numpy as np
import pandas as pd
import pytest

from quanteasy.errors import EmptyFile, NoBracket, NoBracketingMaturities
from quanteasy.impvol import (
    OptionQuote,
    SmileGrid,
    TermPoint,
    baw_price,
    black76_price,
    build_smile,
    clean_quotes,
    implied_vol_index,
    interp_30d,
    invert_baw_iv,
    load_quotes,
    load_zero_curve,
    synth_variance_swap,
    zero_rate,
)
from quanteasy.simulate import flat_smile_quotes

DAY = pd.Timestamp("2020-03-02")


def _quote(strike, kind, price, days=48, F=100.0, rate=0.01):
    return OptionQuote(DAY, DAY + pd.Timedelta(days=days), strike, kind, price, F, rate)


def _flat_smile(sigma, tau=30 / 365.0, F=100.0, points=2001):
    half = 10.0 * sigma * np.sqrt(tau)
    return SmileGrid(DAY + pd.Timedelta(days=30), np.linspace(-half, half, points), np.full(points, sigma), F, tau)


def test_black76_at_the_money():
    assert black76_price(100.0, 100.0, 0.25, 0.2) == pytest.approx(3.9878, abs=1e-4)


def test_black76_zero_volatility():
    assert black76_price(100.0, 90.0, 0.5, 0.0, 0.98) == pytest.approx(0.98 * 10.0)
    assert black76_price(100.0, 110.0, 0.5, 0.0, 0.98, "put") == pytest.approx(0.98 * 10.0)
    assert black76_price(100.0, 110.0, 0.5, 0.0) == 0.0


def test_put_call_parity():
    strikes = np.linspace(50.0, 150.0, 41)
    disc = np.exp(-0.03 * 0.7)
    call = black76_price(100.0, strikes, 0.7, 0.25, disc, "call")
    put = black76_price(100.0, strikes, 0.7, 0.25, disc, "P")
    np.testing.assert_allclose(call - put, disc * (100.0 - strikes), atol=1e-10)
    with pytest.raises(ValueError):
        black76_price(100.0, 100.0, 0.7, 0.25, disc, "straddle")


def test_baw_without_rates_is_european():
    for kind in ("call", "put"):
        assert baw_price(100.0, 95.0, 0.5, 0.3, 0.0, kind) == black76_price(100.0, 95.0, 0.5, 0.3, 1.0, kind)


def test_baw_deep_in_the_money_put():
    assert baw_price(50.0, 100.0, 1.0, 0.2, 0.05, "put") == pytest.approx(50.0, rel=5e-3)


def test_baw_dominates_european():
    rng = np.random.default_rng(0)
    for _ in range(300):
        X = 100.0
        F = X * rng.uniform(0.7, 1.3)
        tau, sigma, rate = rng.uniform(0.05, 1.0), rng.uniform(0.1, 0.5), rng.uniform(0.005, 0.08)
        kind = "call" if rng.random() < 0.5 else "put"
        european = black76_price(F, X, tau, sigma, np.exp(-rate * tau), kind)
        assert baw_price(F, X, tau, sigma, rate, kind) >= european - 1e-10


def test_implied_vol_round_trip():
    for strike, kind in ((90.0, "put"), (100.0, "call"), (115.0, "call")):
        price = baw_price(100.0, strike, 48 / 365.0, 0.3, 0.01, kind)
        assert invert_baw_iv(_quote(strike, kind, price)) == pytest.approx(0.3, abs=1e-6)


def test_implied_vol_increases_with_price():
    vols = [invert_baw_iv(_quote(100.0, "call", p)) for p in (1.0, 2.0, 4.0, 8.0)]
    assert np.all(np.diff(vols) > 0)


def test_price_below_intrinsic_has_no_bracket():
    with pytest.raises(NoBracket):
        invert_baw_iv(_quote(80.0, "call", 10.0))


def test_clean_quotes_reasons():
    quotes = [
        _quote(100.0, "call", 3.0, days=5),
        _quote(140.0, "call", 0.01),
        _quote(100.0, "call", 120.0),
        _quote(100.0, "call", 3.0),
    ]
    kept, dropped = clean_quotes(quotes)
    assert kept == [quotes[3]]
    assert [reason for _, reason in dropped] == ["maturity", "price floor", "arbitrage bound"]


def test_flat_smile_is_recovered():
    quotes = flat_smile_quotes(DAY, expiry_days=(48,), sigma=0.2)
    smile = build_smile(quotes)
    np.testing.assert_allclose(smile.quote_iv, 0.2, atol=1e-3)
    assert smile.iv[0] == smile.quote_iv[0]
    assert smile.iv[-1] == smile.quote_iv[-1]
    assert len(smile.moneyness_grid) == 2001


def test_smile_interpolates_linearly():
    tau = 48 / 365.0
    put = _quote(90.0, "put", baw_price(100.0, 90.0, tau, 0.3, 0.01, "put"))
    call = _quote(110.0, "call", baw_price(100.0, 110.0, tau, 0.2, 0.01, "call"))
    smile = build_smile([put, call], grid_points=11)
    k1, k2 = np.log(0.9), np.log(1.1)
    assert smile.atm_iv == pytest.approx(0.3 + (0.2 - 0.3) * (0.0 - k1) / (k2 - k1), abs=1e-6)


def test_variance_swap_of_flat_smile():
    point = synth_variance_swap(_flat_smile(0.2), 1.0)
    assert point.imv == pytest.approx(0.04, rel=0.01)
    assert point.days == 30
    doubled = synth_variance_swap(_flat_smile(0.4), 1.0)
    assert doubled.imv / point.imv == pytest.approx(4.0, rel=0.01)


def test_variance_swap_without_volatility():
    assert synth_variance_swap(_flat_smile(0.0), 1.0).imv == 0.0


def test_interp_30d():
    p20 = TermPoint(DAY, 0.04, 1.0, 20)
    p48 = TermPoint(DAY, 0.04, 1.0, 48)
    assert interp_30d(p20, p48) == pytest.approx(0.04)
    p30 = TermPoint(DAY, 0.05, 1.0, 30)
    assert interp_30d(p30, p48) == 0.05
    p60 = TermPoint(DAY, 0.09, 1.0, 60)
    expected = (0.04 * 48 * 30 + 0.09 * 60 * -18) / (12 * 30)
    assert interp_30d(p48, p60, extrapolate=True) == pytest.approx(max(0.0, expected))
    with pytest.raises(NoBracketingMaturities):
        interp_30d(p48, p60)


def test_index_of_flat_smile():
    quotes = flat_smile_quotes(DAY, expiry_days=(20, 48), sigma=0.2)
    quotes += flat_smile_quotes(DAY + pd.Timedelta(days=1), expiry_days=(19, 47), sigma=0.25)
    index = implied_vol_index(quotes)
    assert list(index.columns) == ["imv_30d", "iv_30d", "n_expiries", "method"]
    assert index["iv_30d"].to_numpy() == pytest.approx([0.2, 0.25], rel=0.01)
    assert (index["method"] == "interpolated").all()


def test_index_with_one_expiry():
    quotes = flat_smile_quotes(DAY, expiry_days=(48,), sigma=0.2)
    assert implied_vol_index(quotes).empty
    single = implied_vol_index(quotes, single_expiry=True)
    assert single["method"].tolist() == ["single_expiry"]
    assert single["iv_30d"].iloc[0] == pytest.approx(0.2, rel=0.01)


def test_load_quotes(tmp_path):
    quotes = flat_smile_quotes(DAY, expiry_days=(20,), sigma=0.2)
    rows = [
        {
            "date": q.quote_date.strftime("%Y-%m-%d"),
            "expiry": q.expiry.strftime("%Y-%m-%d"),
            "strike": q.strike,
            "cp_flag": "C" if q.is_call else "P",
            "settle_price": q.price,
            "futures_price": q.futures_price,
        }
        for q in quotes
    ]
    path = tmp_path / "quotes.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    loaded = load_quotes(path)
    assert len(loaded) == len(quotes)
    assert loaded[0].rate == 0.0

    curve_path = tmp_path / "curve.csv"
    pd.DataFrame({"date": ["2020-03-02", "2020-03-02"], "days": [10, 30], "rate": [0.01, 0.02]}).to_csv(
        curve_path, index=False
    )
    curve = load_zero_curve(curve_path)
    assert zero_rate(curve, DAY, 20) == pytest.approx(0.015)
    assert zero_rate(curve, DAY + pd.Timedelta(days=3), 60) == pytest.approx(0.02)
    assert load_quotes(path, curve)[0].rate == pytest.approx(0.015)


def test_load_empty_quotes(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(EmptyFile):
        load_quotes(path)
