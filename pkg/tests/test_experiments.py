import csv
import json

import numpy as np
import pytest

from garsamp.errors import ConfigError
from garsamp.harness import experiments as E
from garsamp.samplers import SamplerTrace

SMALL = {
    1: {"n_samples": 400, "curve_samples": 400, "gamma_curve": [0.0, 2.0, 3.7]},
    2: {"n_samples": 300, "curve_replications": 8, "curve_length": 5, "mean_replications": 1,
        "alpha_grid": {"start": 0.2, "stop": 5.0, "count": 2}},
    3: {"n_samples": 40, "fixed_batch": 16},
}
FILES = {
    1: {"bounds.csv", "samples.csv", "trace.csv", "histogram.csv", "rs_curve.csv", "summary.json"},
    2: {"samples.csv", "trace.csv", "histogram.csv", "curve.csv", "means.csv", "summary.json"},
    3: {"chain.csv", "chain_fixed.csv", "trace_x1.csv", "trace_x2.csv", "histogram2d.csv", "summary.json"},
}


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv("GARSAMP_THREADS", "1")


@pytest.mark.parametrize("example", [1, 2, 3])
def test_small_runs_write_reports(tmp_path, example):
    summary = E.run_example(example, tmp_path, SMALL[example])
    assert {p.name for p in tmp_path.iterdir()} == FILES[example]
    assert json.loads((tmp_path / "summary.json").read_text())["example"] == example
    assert summary["example"] == example
    assert b"\r\n" not in (tmp_path / "summary.json").read_bytes()


@pytest.mark.parametrize("example", [1, 2, 3])
def test_runs_are_byte_identical(tmp_path, example):
    a, b = tmp_path / "a", tmp_path / "b"
    E.run_example(example, a, SMALL[example])
    E.run_example(example, b, SMALL[example])
    for name in FILES[example]:
        if example == 3 and name == "summary.json":
            continue  # holds wall-clock timings
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_example1_bound_table(tmp_path, cfg1):
    E.run_example(1, tmp_path, SMALL[1])
    rows = _read(tmp_path / "bounds.csv")
    assert tuple(rows[0]) == E.BOUND_HEADER
    gammas = {r[0]: float(r[1]) for r in rows[1:]}
    assert set(gammas) == {"bm1", "transform", "tangent", "bm2", "quad_gamma2", "optimal"}
    assert gammas["bm2"] <= gammas["optimal"] + 1e-9
    for r in rows[1:]:
        assert float(r[2]) == pytest.approx(np.exp(-float(r[1])))


def test_trace_columns(tmp_path):
    E.run_example(2, tmp_path, SMALL[2])
    rows = _read(tmp_path / "trace.csv")[1:]
    assert [int(r[0]) for r in rows] == list(range(1, 301))
    props = np.array([int(r[1]) for r in rows])
    rates = np.array([float(r[2]) for r in rows])
    np.testing.assert_allclose(rates, np.arange(1, 301) / np.cumsum(props))


def test_failed_run_cleans_up(tmp_path):
    out = tmp_path / "run"
    with pytest.raises(ConfigError):
        E.run_example(1, out, {**SMALL[1], "gamma_curve": [0.0, 99.0]})
    assert not out.exists()


def test_outputs_keeps_existing_dir(tmp_path):
    (tmp_path / "keep.txt").write_text("x")
    with pytest.raises(RuntimeError):
        with E.outputs(tmp_path) as out:
            out.csv("a.csv", ("a",), [(1.0,)])
            raise RuntimeError
    assert [p.name for p in tmp_path.iterdir()] == ["keep.txt"]


def test_float_formatting(tmp_path):
    with E.outputs(tmp_path) as out:
        out.csv("f.csv", ("v",), [(0.1,), (float("inf"),), (float("nan"),), (3,)])
    assert (tmp_path / "f.csv").read_text() == "v\n0.1\ninf\nnan\n3\n"


def test_acceptance_by_index():
    t1 = SamplerTrace(samples=[0.0, 0.0], proposals=[1, 3])
    t2 = SamplerTrace(samples=[0.0, 0.0], proposals=[3, 1])
    pooled, mean_inv = E.acceptance_by_index([t1, t2], 2)
    np.testing.assert_allclose(pooled, [0.5, 0.5])
    np.testing.assert_allclose(mean_inv, [2 / 3, 2 / 3])


def test_pool_size(monkeypatch):
    monkeypatch.setenv("GARSAMP_THREADS", "3")
    assert E.pool_size() == 3
    monkeypatch.setenv("GARSAMP_THREADS", "x")
    with pytest.raises(ConfigError):
        E.pool_size()


def _square(v):
    return v * v


def test_pool_map_order_with_processes():
    assert E.pool_map(_square, list(range(10)), workers=2) == [v * v for v in range(10)]


def test_curve_independent_of_workers(cfg2):
    a = E.gars_curve(cfg2, "alpha", 2.0, 6, 4, 5, workers=1)
    b = E.gars_curve(cfg2, "alpha", 2.0, 6, 4, 5, workers=2)
    np.testing.assert_array_equal(a[0], b[0])
