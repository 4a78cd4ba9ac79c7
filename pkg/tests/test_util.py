#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for output helpers, seeding and timing."""
import io
import json

import numpy as np
import pandas as pd

from quanteasy.util import Progbar, Tictoc, format_time, progress, stream_seed, to_jsonable, write_csv, write_json


def test_to_jsonable():
    out = to_jsonable({"a": np.float64(np.nan), 1: np.arange(2), "t": pd.Timestamp("2020-01-02"), "b": np.bool_(True)})
    assert out == {"a": None, "1": [0, 1], "t": "2020-01-02", "b": True}
    assert to_jsonable((np.int32(3), np.inf)) == [3, None]


def test_write_json(tmp_path):
    path = write_json({"x": np.array([0.5, np.nan])}, tmp_path / "sub" / "x.json")
    assert json.loads(path.read_text()) == {"x": [0.5, None]}


def test_write_csv_is_stable(tmp_path):
    df = pd.DataFrame({"x": [1 / 3, 2.0]})
    a = write_csv(df, tmp_path / "a.csv").read_bytes()
    b = write_csv(df.copy(), tmp_path / "b.csv").read_bytes()
    assert a == b == b"x\n0.3333333333\n2\n"


def test_stream_seed():
    assert stream_seed(0, 1, 2) == stream_seed(0, 1, 2)
    seeds = {stream_seed(0, i, j) for i in range(10) for j in range(10)}
    assert len(seeds) == 100


def test_tictoc_sums_durations():
    tt = Tictoc(output=None, additive=True)
    for _ in range(3):
        tt.tic("fit")
        tt.toc()
    summary = tt.summary()
    assert list(summary) == ["fit"]
    assert summary["fit"] >= 0


def test_progress():
    assert list(progress(range(5), progbar=False)) == [0, 1, 2, 3, 4]
    assert format_time(75) == "1:15"
    assert format_time(3) == "3s"


def test_progbar_finishes_line():
    out = io.StringIO()
    bar = Progbar(4, width=8, stream=out)
    for i in range(1, 5):
        bar.update(i)
    text = out.getvalue()
    assert text.endswith("\n")
    assert "4/4 [########]" in text
