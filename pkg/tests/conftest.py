# -*- coding: utf-8 -*-

"""Shared fixtures: simulated panels and synthetic tick files.

Simulations are expensive, so they are built once per test session.
"""
import pytest

from quanteasy.ingest import SessionSpec
from quanteasy.simulate import simulate_panel, simulate_ticks


@pytest.fixture(scope="session")
def spec():
    return SessionSpec()


@pytest.fixture(scope="session")
def sim_panel():
    """``(panel, returns, variance)`` of 800 simulated days with implied volatility."""
    return simulate_panel(n_days=800, seed=1)


@pytest.fixture(scope="session")
def ticks(spec):
    return simulate_ticks(n_days=5, spec=spec, ticks_per_day=400, seed=3)


@pytest.fixture(scope="session")
def tick_csv(tmp_path_factory, ticks):
    """The five simulated days written as an ISO-timestamp CSV."""
    path = tmp_path_factory.mktemp("ticks") / "ticks.csv"
    frame = ticks.frame.copy()
    frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%S.%f")
    frame.to_csv(path, index=False)
    return path
