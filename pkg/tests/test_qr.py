#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for the interior point quantile regression and the block bootstrap."""
import numpy as np
import pytest
from scipy import stats

from quanteasy.errors import DimensionMismatch, RankDeficientDesign
from quanteasy.qr import (
    BootstrapConfig,
    Dataset,
    QuantileFit,
    check_loss,
    fit_lqr,
    fit_lqr_lp,
    mbb_covariance,
    predict_quantile,
    quantile_process,
)


def _linear(n, seed, scale=None):
    """``y = 1 + 2 x + s(x) e`` with ``x`` uniform on [0, 2]."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 2.0, n)
    s = 1.0 if scale is None else scale(x)
    y = 1.0 + 2.0 * x + s * rng.standard_normal(n)
    return Dataset(y, np.column_stack([np.ones(n), x]), ["const", "x"])


def test_check_loss():
    assert check_loss(1.0, 0.05) == pytest.approx(0.05)
    assert check_loss(-1.0, 0.05) == pytest.approx(0.95)
    assert check_loss(0.0, 0.3) == 0
    with pytest.raises(ValueError):
        check_loss(1.0, 1.0)


def test_intercept_only_median():
    fit = fit_lqr(Dataset([1.0, 2.0, 3.0], np.ones(3), ["const"]), 0.5)
    assert fit.beta == pytest.approx([2.0])


def test_intercept_only_quantile_between_order_statistics():
    y = np.random.default_rng(3).standard_normal(100)
    beta = fit_lqr(Dataset(y, np.ones(100), ["const"]), 0.25).beta[0]
    ys = np.sort(y)
    assert ys[24] - 1e-9 <= beta <= ys[25] + 1e-9


def test_exact_interpolation():
    rng = np.random.default_rng(4)
    x = np.column_stack([np.ones(50), rng.standard_normal((50, 2))])
    b = np.array([0.5, -1.0, 2.0])
    fit = fit_lqr(Dataset(x @ b, x, ["const", "a", "b"]), 0.3)
    np.testing.assert_allclose(fit.beta, b, atol=1e-7)
    assert fit.objective == pytest.approx(0.0, abs=1e-9)


def test_matches_lp_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(20, 201))
        p = int(rng.integers(1, 6))
        x = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        y = x @ rng.standard_normal(p) + stats.t.rvs(3, size=n, random_state=rng)
        data = Dataset(y, x, [f"x{j}" for j in range(p)])
        alpha = float(rng.uniform(0.02, 0.98))
        assert fit_lqr(data, alpha).objective == pytest.approx(fit_lqr_lp(data, alpha).objective, abs=1e-6)


def test_rank_deficient_design():
    x = np.column_stack([np.ones(30), np.arange(30.0), 2 * np.arange(30.0)])
    with pytest.raises(RankDeficientDesign):
        fit_lqr(Dataset(np.arange(30.0), x, ["const", "a", "b"]), 0.5)


def test_dataset_checks():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros(5), np.ones((4, 1)), ["const"])
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros(5), np.ones((5, 1)), ["const", "x"])
    with pytest.raises(ValueError):
        Dataset([1.0, np.nan, 2.0], np.ones(3), ["const"])


def test_predict():
    fit = QuantileFit(0.5, np.array([1.0, 2.0]), np.zeros(3), 0.0, ["const", "x"])
    assert predict_quantile(fit, [1.0, 3.0]) == 7.0
    assert QuantileFit(0.5, np.zeros(2), np.zeros(3), 0.0).predict([1.0, 3.0]) == 0.0
    with pytest.raises(DimensionMismatch):
        predict_quantile(fit, [1.0])


def test_intercept_only_prediction_is_constant():
    fit = fit_lqr(Dataset(np.arange(10.0), np.ones(10), ["const"]), 0.5)
    assert predict_quantile(fit, [1.0]) == fit.beta[0]


def test_location_shift_slopes_are_flat():
    data = _linear(2000, seed=6)
    process = quantile_process(data, [0.1, 0.3, 0.5, 0.7, 0.9], bootstrap=BootstrapConfig(200, seed=1))
    for fit in process:
        se = np.sqrt(fit.cov[1, 1])
        assert abs(fit.beta[1] - 2.0) < 3.0 * se
    assert process.crossings == 0


def test_scale_model_slopes_increase():
    data = _linear(2000, seed=7, scale=lambda x: 0.5 + x)
    slopes = [f.beta[1] for f in quantile_process(data, [0.1, 0.3, 0.5, 0.7, 0.9])]
    assert np.all(np.diff(slopes) > 0)


def test_single_level_process_equals_fit():
    data = _linear(300, seed=8)
    (fit,) = quantile_process(data, [0.25])
    np.testing.assert_array_equal(fit.beta, fit_lqr(data, 0.25).beta)
    with pytest.raises(ValueError):
        quantile_process(data, [0.5, 0.25])


def test_coefficient_table():
    data = _linear(300, seed=9)
    table = fit_lqr(data, 0.5, bootstrap=BootstrapConfig(100, seed=2)).coefficient_table()
    assert list(table.columns) == ["alpha", "term", "beta", "std_error", "tstat"]
    assert list(table["term"]) == ["const", "x"]


def test_bootstrap_is_deterministic():
    data = _linear(300, seed=10)
    cfg = BootstrapConfig(100, seed=42)
    cov1, t1 = mbb_covariance(data, 0.5, cfg)
    cov2, t2 = mbb_covariance(data, 0.5, cfg)
    np.testing.assert_array_equal(cov1, cov2)
    np.testing.assert_array_equal(t1, t2)


def test_bootstrap_config_checks():
    with pytest.raises(ValueError):
        BootstrapConfig(replications=50)
    assert BootstrapConfig().resolve_block_length(1000) == 10
    with pytest.raises(ValueError):
        BootstrapConfig(block_length=20).resolve_block_length(10)


def test_full_length_blocks_only_rotate_the_sample():
    data = _linear(100, seed=11)
    cov, _ = mbb_covariance(data, 0.5, BootstrapConfig(100, block_length=100, seed=3))
    assert np.all(np.sqrt(np.diag(cov)) < 1e-6)


@pytest.mark.slow
def test_bootstrap_matches_sandwich_on_iid_data():
    n, alpha = 1000, 0.5
    data = _linear(n, seed=12)
    cov, _ = mbb_covariance(data, alpha, BootstrapConfig(1000, seed=4))
    density = stats.norm.pdf(0.0)
    sandwich = alpha * (1 - alpha) / density ** 2 * np.linalg.inv(data.x.T @ data.x)
    np.testing.assert_allclose(np.sqrt(np.diag(cov)), np.sqrt(np.diag(sandwich)), rtol=0.15)
