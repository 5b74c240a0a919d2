from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdguide import experiment
from crowdguide.config import ExperimentSpec, SimConfig
from crowdguide.experiment import (
    RunResult,
    quartiles,
    read_runs,
    run_batch,
    run_seed,
    summarize_dir,
    summarize_results,
)
from crowdguide.records import read_summary
from crowdguide.simulator import SimulationDiverged

TINY = SimConfig(horizon=0.3)


def spec(**kw):
    base = dict(humans=(20,), robots=(3,), regimes=("none",), replications=1, base=TINY)
    base.update(kw)
    return ExperimentSpec(**base)


def test_midpoint_quartiles():
    assert quartiles([60, 70, 80, 90]) == (60.0, 65.0, 75.0, 85.0, 90.0)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30))
def test_quartiles_ordered(rates):
    q = quartiles(rates)
    assert all(a <= b for a, b in zip(q, q[1:]))
    assert 0 <= q[0] and q[-1] <= 100


def test_seed_is_stable_and_cell_specific():
    a = run_seed(0, (250, 16, "none"), 0)
    assert a == run_seed(0, (250, 16, "none"), 0)
    assert a != run_seed(0, (250, 16, "none"), 1)
    assert a != run_seed(0, (250, 16, "static"), 0)
    assert run_seed(5, (250, 16, "none"), 0) == a ^ 5
    assert 0 <= a < 2**64


def test_one_cell_one_replication(tmp_path):
    rows = run_batch(spec(), 1, tmp_path)
    assert len(rows) == 1 and rows[0].replications == 1 and rows[0].failures == 0
    assert len(list((tmp_path / "metrics").iterdir())) == 1
    assert read_summary(tmp_path / "summary.csv") == rows


def test_parallelism_does_not_change_bytes(tmp_path):
    s = spec(robots=(2, 3), replications=2)
    run_batch(s, 1, tmp_path / "a")
    run_batch(s, 3, tmp_path / "b")
    for name in ("summary.csv", "runs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    files = sorted(p.name for p in (tmp_path / "a" / "metrics").iterdir())
    assert len(files) == 4
    for f in files:
        assert (tmp_path / "a" / "metrics" / f).read_bytes() == (tmp_path / "b" / "metrics" / f).read_bytes()


def test_summarize_reproduces_summary(tmp_path):
    run_batch(spec(replications=3), 1, tmp_path)
    before = (tmp_path / "summary.csv").read_bytes()
    (tmp_path / "summary.csv").unlink()
    summarize_dir(tmp_path)
    assert (tmp_path / "summary.csv").read_bytes() == before


def test_diverged_runs_are_marked(tmp_path, monkeypatch):
    real = experiment.run

    def flaky(cfg, **kw):
        if cfg.seed == run_seed(0, (20, 3, "none"), 1):
            raise SimulationDiverged(4)
        return real(cfg, **kw)

    monkeypatch.setattr(experiment, "run", flaky)
    rows = run_batch(spec(replications=3), 1, tmp_path)
    assert rows[0].replications == 3 and rows[0].failures == 1
    runs = read_runs(tmp_path / "runs.csv")
    assert [r.ok for r in runs] == [True, False, True]
    assert "failed" in (tmp_path / "runs.csv").read_text()


def test_all_failed_cell_reports_nan():
    bad = [RunResult((1, 1, "none"), 0, 0, False, float("nan"), float("nan"))]
    row = summarize_results([(1, 1, "none")], bad)[0]
    assert row.failures == 1 and np.isnan(row.rate_median)


def test_bad_parallelism(tmp_path):
    with pytest.raises(ValueError):
        run_batch(spec(), 0, tmp_path)
