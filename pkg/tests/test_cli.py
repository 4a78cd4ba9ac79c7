#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""End-to-end tests of the command line on a small synthetic dataset."""
import json

import pandas as pd
import pytest

from quanteasy.cli import _in_sample_models, build_parser, main
from quanteasy.config import load_config


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """A simulated dataset of 80 days and a config with light settings for it."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--out", str(root / "data"), "--days", "80", "--seed", "1", "-q"]) == 0
    cfg = load_config(root / "data" / "config.ini")
    cfg.replications = 100
    cfg.caviar_draws = 50
    cfg.caviar_polish = 1
    cfg.arfima_draws = 200
    cfg.truncation = 100
    cfg.horizons = [1, 5]
    cfg.return_models = ["LQR1", "LQR2"]
    cfg.rv_models = ["HARQ1"]
    cfg.caviar_models = ["SAV"]
    return cfg, cfg.write(root / "light.ini")


def test_parser_lists_commands():
    parser = build_parser()
    args = parser.parse_args(["backtest", "-c", "x.ini", "--target", "rv_sqrt", "--no-progbar"])
    assert args.target == "rv_sqrt"
    assert args.progbar is False
    with pytest.raises(SystemExit):
        parser.parse_args(["calibrate"])


def test_simulate_writes_inputs(dataset):
    cfg, _ = dataset
    for path in (cfg.ticks, cfg.implied_vol, cfg.quotes):
        assert pd.read_csv(path).shape[0] > 0
    cfg.validate(require=("ticks", "quotes"))


def test_measures(dataset, tmp_path):
    _, config = dataset
    assert main(["measures", "-c", str(config), "-o", str(tmp_path / "a"), "--signature", "-q"]) == 0
    panel = pd.read_csv(tmp_path / "a" / "panel.csv")
    assert len(panel) == 80
    assert {"rv", "medrv", "iv", "jv", "jump_flag", "implied_vol"} <= set(panel.columns)
    assert (tmp_path / "a" / "config.ini").exists()
    assert json.loads((tmp_path / "a" / "jumps.json").read_text())
    assert len(pd.read_csv(tmp_path / "a" / "signature.csv")) > 0

    assert main(["measures", "-c", str(config), "-o", str(tmp_path / "b"), "-q"]) == 0
    for name in ("panel.csv", "returns.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fit_returns_with_process(dataset, tmp_path):
    _, config = dataset
    argv = ["fit-returns", "-c", str(config), "-o", str(tmp_path), "-m", "LQR1", "-a", "0.1", "-a", "0.9"]
    assert main(argv + ["--quantile-process", "--plot", "-q", "--no-progbar"]) == 0
    fit = json.loads((tmp_path / "fit_LQR1_h1.json").read_text())
    assert fit["model"] == "LQR1"
    assert len(fit["fits"]) == 2
    coefs = pd.read_csv(tmp_path / "coefficients_LQR1_h1.csv")
    assert set(coefs["term"]) == {"const", "RV^1/2"}
    assert (tmp_path / "quantile_process_LQR1_h1.svg").read_text().lstrip().startswith("<?xml")


def test_fit_rv_rejects_return_model(dataset, tmp_path):
    _, config = dataset
    assert main(["fit-rv", "-c", str(config), "-o", str(tmp_path), "-m", "LQR1", "-q"]) == 2


def test_unknown_model(dataset, tmp_path):
    _, config = dataset
    assert main(["fit-returns", "-c", str(config), "-o", str(tmp_path), "-m", "LQR9", "-q"]) == 2


def test_missing_tick_file(dataset, tmp_path):
    cfg, _ = dataset
    broken = load_config(cfg.write(tmp_path / "copy.ini"))
    broken.ticks = str(tmp_path / "missing.csv")
    path = broken.write(tmp_path / "broken.ini")
    assert main(["measures", "-c", str(path), "-o", str(tmp_path / "out"), "-q"]) == 2


def test_empty_tick_file(dataset, tmp_path):
    cfg, _ = dataset
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    cfg = load_config(cfg.write(tmp_path / "copy.ini"))
    cfg.ticks = str(empty)
    path = cfg.write(tmp_path / "empty.ini")
    assert main(["measures", "-c", str(path), "-o", str(tmp_path / "out"), "-q"]) == 3


def test_impvol(dataset, tmp_path):
    _, config = dataset
    assert main(["impvol", "-c", str(config), "-o", str(tmp_path), "-q"]) == 0
    index = pd.read_csv(tmp_path / "implied_vol_30d.csv")
    assert len(index) == 5
    assert (index["iv_30d"] > 0).all()


def test_forecast(dataset, tmp_path):
    _, config = dataset
    assert main(["forecast", "-c", str(config), "-o", str(tmp_path), "-q"]) == 0
    table = pd.read_csv(tmp_path / "forecast.csv")
    assert set(table["model"]) == {"LQR1", "LQR2", "HARQ1", "SAV", "ARFIMA"}
    assert set(table["horizon"]) == {1, 5}
    assert table["quantile"].notna().all()


def test_fit_arfima(dataset, tmp_path):
    _, config = dataset
    assert main(["fit-arfima", "-c", str(config), "-o", str(tmp_path), "-q"]) == 0
    table = pd.read_csv(tmp_path / "arfima_coefficients.csv", index_col="parameter")
    assert list(table.index) == ["mu", "phi", "d", "sigma_u2"]


@pytest.mark.slow
def test_backtest(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "data"), "--days", "400", "--seed", "2", "-q"]) == 0
    cfg = load_config(tmp_path / "data" / "config.ini")
    cfg.n_oos = 120
    cfg.horizons = [1]
    cfg.alphas = [0.05, 0.95]
    cfg.mc_reps = 49
    cfg.refit_every = 20
    cfg.caviar_models = ["SAV"]
    cfg.caviar_draws = 100
    cfg.caviar_polish = 1
    cfg.caviar_refit_every = 60
    cfg.truncation = 100
    cfg.arfima_draws = 200
    cfg.arfima_refit_every = 200
    config = cfg.write(tmp_path / "bt.ini")
    out = tmp_path / "results"
    assert main(["backtest", "-c", str(config), "-o", str(out), "--plot", "-q", "--no-progbar"]) == 0
    for target in ("return", "rv_sqrt"):
        report = pd.read_csv(out / target / "report.csv")
        assert set(report["alpha"]) == {0.05, 0.95}
        assert (out / target / "coverage.svg").exists()
        assert (out / target / "tick_loss.svg").exists()
    models = set(pd.read_csv(out / "return" / "report.csv")["model"])
    assert models == {"LQR1", "LQR2", "LQR3", "SAV", "ARFIMA"}


def test_in_sample_covers_rv_models(dataset):
    cfg, _ = dataset
    assert _in_sample_models(cfg, pd.Series(dtype=float)) == ["LQR1", "LQR2", "SAV", "HARQ1"]
    assert _in_sample_models(cfg, None) == ["HARQ1"]
