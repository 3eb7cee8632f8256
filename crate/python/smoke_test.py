"""Smoke tests for the advgen_py extension. Run with pytest."""

import json
import math
import pathlib

import pytest

import advgen_py as ag

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "crates" / "core" / "fixtures" / "step.trace"
SMOKE = ROOT / "crates" / "core" / "configs" / "smoke.toml"


def test_eq1_examples():
    assert ag.eq1_score(80.0, 20.0) == pytest.approx(0.75, abs=1e-12)
    assert ag.eq1_score(100.0, 300.0, lower_is_better=True) == pytest.approx(2 / 3, abs=1e-12)
    assert ag.eq1_score(5.0, 5.0) == 0.0
    assert ag.eq1_score(0.0, 0.0) == 0.0


def test_trace_round_trip():
    t = ag.Trace([(10, 20, 1000), (50, 5, 500)], 600)
    text = t.to_file_string()
    assert text.startswith("duration_ms,bandwidth_mbps,latency_ms\n1000,10,20\n")
    back = ag.Trace.parse(text)
    assert back.intervals == [(10, 20, 1000), (50, 5, 500)]
    assert back.buffer_packets == 600
    assert back.total_duration_ms() == 1500
    back.validate()
    with pytest.raises(ValueError):
        ag.Trace.parse("not a trace\n")
    with pytest.raises(ValueError):
        ag.Trace([(10, 20, 1000)], 100).validate()


def test_simulator_against_oracle():
    t = ag.Trace.read(str(FIXTURE))
    oracle = ag.capacity_oracle(t)
    assert oracle["throughput_mbps"] == 17.0
    (reno,) = ag.simulate(t, ["reno"])
    assert reno["model"] == "reno"
    assert math.isclose(reno["throughput_mbps"], 13.0632, abs_tol=1e-9)
    assert reno["throughput_mbps"] <= oracle["throughput_mbps"]
    flows = ag.simulate(t, ["vegas", "bbr_like"], seed=3, jitter_sigma_ms=2.0)
    assert [f["model"] for f in flows] == ["vegas", "bbr_like"]
    with pytest.raises(ValueError):
        ag.simulate(t, ["cubic"])


def test_bench_pls_rows():
    rows = ag.bench_pls(budgets=[50, 100], trials=40)
    assert len(rows) == 2 * 6
    assert {r[1] for r in rows} == {"oracle", "simple_max", "round_robin", "ocba", "tre", "mre"}


def test_pipeline_and_replay(tmp_path):
    report = json.loads(ag.run_experiment(SMOKE.read_text(), str(tmp_path)))
    assert report["budget"]["optimizer_calls"] == 270
    assert 0.0 < report["reevaluated"]["mean"] <= 1.0
    for name in ("history.csv", "winner.trace", "report.json"):
        assert (tmp_path / name).is_file()
    mean, std, scores = ag.replay(str(tmp_path / "winner.trace"), SMOKE.read_text())
    assert mean == report["reevaluated"]["mean"]
    assert std == 0.0 and len(scores) == 5
    with pytest.raises(ValueError):
        ag.run_experiment("seed = 1\n")
