"""Long-horizon checks of the analytical guarantees on default scenarios."""
import time
from collections import defaultdict

import numpy as np
import pytest
from maritime_mec._config import POLICIES, ScenarioConfig
from maritime_mec.monitor import DriftBoundMonitor, EnergyClampMonitor, VirtualQueueMonitor
from maritime_mec.policy import mu_max, schedule_slot
from maritime_mec.sim import NullSink, RecordSink, run_simulation
from maritime_mec.sweep import SweepSpec, run_sweep, trend_statistics
from scipy import stats

from common import make_chan, make_state

pytestmark = pytest.mark.slow


class _QueueTrace(RecordSink):
    def __init__(self):
        self.totals = []

    def write(self, record):
        self.totals.append(int(record.q_tu.sum() + record.q_mis.sum()))


def _by_policy(rows, value, metric):
    return {
        row["policy"]: row[metric]
        for row in rows
        if row["value"] == value and row[metric] is not None
    }


def test_drift_bound_on_default_run():
    cfg = ScenarioConfig(queue_mode="literal", horizon_slots=10_000)
    monitor = DriftBoundMonitor(cfg)
    run_simulation(cfg, sink=NullSink(), monitors=[monitor])
    assert monitor.slots == 10_000
    assert monitor.violations == 0, monitor.report()


def test_virtual_queue_and_energy_clamp_vanish():
    cfg = ScenarioConfig(control_v=0.1, horizon_slots=100_000)
    virtual = VirtualQueueMonitor(cfg)
    clamp = EnergyClampMonitor(cfg, trailing=0.5)
    summary, _ = run_simulation(cfg, sink=NullSink(), monitors=[virtual, clamp])

    report = virtual.report()
    assert max(report["z_over_t"]) < 0.01
    assert report["balanced"]
    assert clamp.rate() < 0.01
    assert summary.final_z_over_t == pytest.approx(max(report["z_over_t"]))


def test_throughput_and_queue_grow_with_v():
    spec = SweepSpec(
        param="control_v",
        values=(0.01, 0.05, 0.1, 0.5, 1.0),
        reps=10,
        base=ScenarioConfig(),
        slots=2_000,
    )
    rows = run_sweep(spec)
    throughput = trend_statistics(rows, "avg_throughput")
    queue = trend_statistics(rows, "avg_queue")
    assert throughput["spearman"] > 0.9
    assert queue["spearman"] > 0.9
    assert queue["slope"] > 0
    assert queue["r_squared"] > 0.8


def test_queues_settle_under_half_load():
    # mean arrivals of 25 tasks per slot against 50 tasks of local capacity alone
    cfg = ScenarioConfig(num_mis=1, tus_per_mis=(1,), max_arrivals=50, horizon_slots=100_000)
    assert cfg.max_arrivals / 2 <= 0.5 * mu_max(cfg)
    trace = _QueueTrace()
    run_simulation(cfg, sink=trace)

    running = np.cumsum(trace.totals) / np.arange(1, len(trace.totals) + 1)
    previous, last = running[89_999], running[99_999]
    assert abs(last - previous) < 0.02 * max(previous, 1.0)


def test_jcora_leads_the_baselines():
    values = (5, 10, 15, 20, 25, 30)
    spec = SweepSpec(
        param="total_tus",
        values=values,
        reps=10,
        policies=POLICIES,
        base=ScenarioConfig(),
        slots=1_000,
    )
    rows = run_sweep(spec)

    for value in values:
        means = defaultdict(list)
        for row in rows:
            if row["value"] == value:
                means[row["policy"]].append(row["avg_throughput"])
        best = np.mean(means["JCORA"])
        for policy in POLICIES[1:]:
            assert best >= np.mean(means[policy]), (value, policy)

        wins = total = 0
        for seed in {row["seed"] for row in rows}:
            pair = [r for r in rows if r["value"] == value and r["seed"] == seed]
            throughput = _by_policy(pair, value, "avg_throughput")
            for policy in POLICIES[1:]:
                wins += throughput["JCORA"] >= throughput[policy]
                total += 1
            latency = _by_policy(pair, value, "avg_latency")
            if "JCORA" in latency and "FRA" in latency:
                wins += latency["JCORA"] <= latency["FRA"]
                total += 1
        assert wins >= 0.9 * total, (value, wins, total)

        latency = defaultdict(list)
        for row in rows:
            if row["value"] == value and row["avg_latency"] is not None:
                latency[row["policy"]].append(row["avg_latency"])
        assert np.mean(latency["JCORA"]) <= np.mean(latency["FRA"]), value


def test_more_charging_helps():
    spec = SweepSpec(
        param="e_max",
        values=(1.0, 2.0, 5.0, 10.0),
        reps=10,
        base=ScenarioConfig(),
        slots=2_000,
    )
    rows = run_sweep(spec)
    assert trend_statistics(rows, "avg_throughput")["spearman"] > 0.8
    assert trend_statistics(rows, "avg_latency")["spearman"] < -0.8


def test_scheduling_time_is_linear_in_size():
    rng = np.random.default_rng(0)
    num_mis, n = 2, 64
    sizes, seconds = [], []
    for per_mis in (1_000, 2_000, 4_000, 8_000, 16_000):
        cfg = ScenarioConfig(
            num_mis=num_mis, tus_per_mis=(per_mis,) * num_mis, subchannels_per_mis=n
        )
        home = np.repeat(np.arange(num_mis), per_mis)
        num_tus = len(home)
        state = make_state(
            rng.integers(0, 5_000, num_tus),
            rng.integers(0, 5_000, num_tus),
            home=home,
            z_virtual=rng.uniform(0, 100, num_mis),
        )
        chan = make_chan(rng.uniform(1e-13, 1e-10, (num_tus, n)), home, num_mis)
        gamma = np.zeros((num_mis, n))
        arrivals = np.zeros(num_tus, dtype=np.int64)

        best = np.inf
        for _ in range(3):
            start = time.perf_counter()
            schedule_slot(state, chan, arrivals, cfg, gamma=gamma)
            best = min(best, time.perf_counter() - start)
        sizes.append(num_mis * n * per_mis)
        seconds.append(best)

    fit = stats.linregress(np.log(sizes), np.log(seconds))
    assert 0.75 <= fit.slope <= 1.25, fit
