import math

import pytest
from maritime_mec._config import POLICIES, ScenarioConfig
from maritime_mec._error import ConfigError
from maritime_mec.sweep import (
    COMPARE_COLUMNS,
    SWEEP_COLUMNS,
    SweepSpec,
    apply_param,
    expand_sweep,
    run_compare,
    run_sweep,
    trend_statistics,
    write_rows,
)

BASE = ScenarioConfig(
    num_mis=2, tus_per_mis=(1, 1), subchannels_per_mis=4, horizon_slots=20, seed=3
)


def test_expand_sweep():
    spec = SweepSpec(
        param="control_v", values=(0.01, 0.05, 0.1, 0.5, 1.0), reps=3, base=BASE
    )
    points = expand_sweep(spec)
    assert len(points) == 15
    assert {p.seed for p in points} == {3, 4, 5}
    assert [p.cfg.control_v for p in points[:3]] == [0.01] * 3
    assert all(p.cfg.seed == p.seed for p in points)


def test_expand_sweep_over_policies():
    spec = SweepSpec(param="e_max", values=(1.0, 2.0), policies=("jcora", "fra"), base=BASE)
    points = expand_sweep(spec)
    assert [p.policy for p in points] == ["JCORA", "FRA", "JCORA", "FRA"]
    assert [p.cfg.max_charge_j_per_slot for p in points] == [1.0, 1.0, 2.0, 2.0]


@pytest.mark.parametrize(
    "changes",
    [
        {"param": "bandwidth"},
        {"values": ()},
        {"reps": 0},
        {"policies": ("GREEDY",)},
    ],
)
def test_invalid_sweep(changes):
    values = dict(param="control_v", values=(0.1,), base=BASE)
    values.update(changes)
    with pytest.raises(ConfigError):
        SweepSpec(**values)


def test_apply_param():
    assert apply_param(BASE, "control_v", 0.5).control_v == 0.5
    assert apply_param(BASE, "total_tus", 5).tus_per_mis == (3, 2)
    uniform = apply_param(BASE, "arrival_mean", 60)
    assert uniform.max_arrivals == 120
    poisson = apply_param(BASE.replace(arrival_mode="poisson"), "arrival_mean", 60)
    assert poisson.arrival_mean == 60.0
    assert poisson.max_arrivals == BASE.max_arrivals
    assert apply_param(BASE, "e_max", 0.5).max_charge_j_per_slot == 0.5
    with pytest.raises(ConfigError):
        apply_param(BASE, "rho", 0.5)


def test_run_sweep_rows():
    spec = SweepSpec(param="control_v", values=(1.0, 0.1), reps=2, base=BASE, slots=10)
    rows = run_sweep(spec, workers=1)
    assert len(rows) == 4
    assert [(r["value"], r["seed"]) for r in rows] == [(0.1, 3), (0.1, 4), (1.0, 3), (1.0, 4)]
    assert all(set(SWEEP_COLUMNS) <= set(r) for r in rows)


def test_run_compare_order():
    rows = run_compare(BASE, reps=2, slots=10, workers=1)
    assert len(rows) == 2 * len(POLICIES)
    assert [r["policy"] for r in rows[: len(POLICIES)]] == list(POLICIES)
    assert [r["seed"] for r in rows] == [3] * len(POLICIES) + [4] * len(POLICIES)
    assert all(tuple(r) == COMPARE_COLUMNS for r in rows)


def test_run_compare_is_reproducible():
    first = run_compare(BASE, policies=("JCORA", "PRA"), slots=10, workers=1)
    second = run_compare(BASE, policies=("JCORA", "PRA"), slots=10, workers=1)
    assert first == second


def test_trend_statistics():
    rows = [
        {"value": v, "policy": "JCORA", "avg_queue": q}
        for v, q in [(1.0, 10.0), (2.0, 20.0), (2.0, 22.0), (3.0, 31.0), (4.0, 40.0)]
    ]
    rows.append({"value": 4.0, "policy": "FRA", "avg_queue": 0.0})
    trend = trend_statistics(rows, "avg_queue", policy="jcora")
    assert trend["values"] == [1.0, 2.0, 3.0, 4.0]
    assert trend["means"] == [10.0, 21.0, 31.0, 40.0]
    assert trend["spearman"] == pytest.approx(1.0)
    assert trend["slope"] > 0
    assert trend["r_squared"] > 0.99


def test_trend_statistics_single_value():
    trend = trend_statistics([{"value": 1.0, "policy": "JCORA", "avg_latency": None}], "avg_latency")
    assert trend["values"] == []
    assert math.isnan(trend["spearman"])


def test_write_rows(tmp_path):
    rows = [
        {"seed": 3, "policy": "JCORA", "avg_throughput": 1.5, "avg_latency": None,
         "avg_queue": 2.0, "avg_energy": 0.25, "final_Z_over_T": 0.0, "violation_rate": 0.0},
    ]
    path = tmp_path / "compare.csv"
    write_rows(path, rows, COMPARE_COLUMNS, BASE, extra={"reps": 1})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# reps = 1"
    data = [line for line in lines if not line.startswith("#")]
    assert data[0] == ",".join(COMPARE_COLUMNS)
    assert data[1] == "3,JCORA,1.5,,2.0,0.25,0.0,0.0"
