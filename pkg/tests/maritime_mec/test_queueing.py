import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from maritime_mec._error import InfeasibleMigrationError
from maritime_mec._model import Decision
from maritime_mec.channel import noise_power
from maritime_mec.policy import schedule_slot
from maritime_mec.queueing import (
    average_latency,
    compute_energy,
    enforce_energy_budget,
    execute_slot,
    lyapunov,
    offload_capacity,
    processing_capacity,
    slot_energy_cost,
    step_energy,
    step_task_queues,
    step_virtual_queue,
)

from common import gain_for_snr, make_chan, make_outcome, make_state, small_config


def _backhaul_1e6(cfg):
    # rho W_c = 1 MHz and unit SNR give exactly 1e6 bits/s
    return np.array([noise_power(cfg, 1e6) / cfg.mis_tx_power_w])


def test_offload_capacity():
    cfg = small_config()
    assert offload_capacity(0.0, cfg) == 0
    assert offload_capacity(1e7, cfg) == 500
    assert offload_capacity(3.999 * 1000 / 0.05, cfg) == 3
    np.testing.assert_array_equal(offload_capacity(np.array([1e7, 2e4]), cfg), [500, 1])


def test_processing_capacity():
    cfg = small_config()
    assert processing_capacity(0.0, cfg) == 0
    assert processing_capacity(1.0, cfg) == 50
    assert processing_capacity(0.5, cfg) == 25


def test_compute_energy_full_cpu():
    assert compute_energy(1.0, small_config()) == pytest.approx(5.0, rel=1e-12)


def test_step_task_queues_tu_queue():
    cfg = small_config()
    state = make_state([10], [0])
    new, transfer = step_task_queues(state, make_outcome([4], [0], [0], [2]), cfg)
    assert new.q_tu[0] == 8
    assert transfer.sent[0] == 4
    assert new.slot == 1

    state = make_state([3], [0])
    new, transfer = step_task_queues(state, make_outcome([10], [0], [0], [0]), cfg)
    assert new.q_tu[0] == 0
    assert transfer.sent[0] == 3


def test_step_task_queues_mis_queue():
    cfg = small_config()
    state = make_state([10], [5])
    new, transfer = step_task_queues(state, make_outcome([4], [2], [1], [0]), cfg)
    assert new.q_mis[0] == 6
    assert transfer.completed[0] == 2
    assert transfer.migrated[0] == 1


def test_step_task_queues_queue_modes():
    state = make_state([3], [0])
    outcome = make_outcome([10], [0], [0], [0])
    conservative, _ = step_task_queues(state, outcome, small_config())
    literal, _ = step_task_queues(state, outcome, small_config(queue_mode="literal"))
    assert conservative.q_mis[0] == 3
    assert literal.q_mis[0] == 10


def test_step_task_queues_finite_buffer_drops():
    cfg = small_config(tu_buffer_tasks=5.0, mis_buffer_tasks=4.0)
    state = make_state([10], [0])
    new, transfer = step_task_queues(state, make_outcome([6], [0], [0], [2]), cfg)
    assert new.q_tu[0] == 5
    assert new.q_mis[0] == 4
    assert transfer.dropped[0] == 1 + 2


def test_slot_energy_cost_idle_is_base_power():
    cfg = small_config(num_mis=2, tus_per_mis=(1, 1))
    chan = make_chan([[1e-10], [1e-10]], [0, 1], 2)
    cost = slot_energy_cost(Decision.idle(2, 1), chan, cfg)
    np.testing.assert_array_equal(cost.c_total, [0.1, 0.1])


def test_slot_energy_cost_compute_and_migration():
    cfg = small_config(backhaul_ratio=0.01)
    chan = make_chan([[1e-10]], [0], 1, beta_backhaul=_backhaul_1e6(cfg))
    decision = Decision(y=np.array([1]), z=np.ones((1, 1)), f=np.array([1.0]), m=np.array([10]))
    cost = slot_energy_cost(decision, chan, cfg)
    assert cost.c_com[0] == pytest.approx(5.0, rel=1e-12)
    assert cost.c_tra[0] == pytest.approx(0.01, rel=1e-9)
    assert cost.c_total[0] == pytest.approx(5.11, rel=1e-9)


def test_slot_energy_cost_migration_without_backhaul():
    cfg = small_config(backhaul_ratio=0.0)
    chan = make_chan([[1e-10]], [0], 1)
    decision = Decision(y=np.array([1]), z=np.ones((1, 1)), f=np.array([0.0]), m=np.array([1]))
    with pytest.raises(InfeasibleMigrationError) as e:
        slot_energy_cost(decision, chan, cfg)
    assert e.value.code == "E0201"


def test_enforce_energy_budget_scales_compute():
    cfg = small_config()
    chan = make_chan([[1e-10]], [0], 1)
    decision = Decision(y=np.array([0]), z=np.zeros((1, 1)), f=np.array([1.0]), m=np.array([0]))
    cost = slot_energy_cost(decision, chan, cfg)
    scaled, new_cost, violated = enforce_energy_budget(decision, cost, np.array([2.0]), chan, cfg)
    assert violated.tolist() == [True]
    assert new_cost.c_total[0] == pytest.approx(2.0, rel=1e-9)
    assert scaled.f[0] == pytest.approx(math.pow(1.9 / 5.0, 1 / 3), rel=1e-9)


def test_enforce_energy_budget_empty_battery():
    cfg = small_config(backhaul_ratio=0.01)
    chan = make_chan([[1e-10]], [0], 1, beta_backhaul=_backhaul_1e6(cfg))
    decision = Decision(y=np.array([1]), z=np.ones((1, 1)), f=np.array([0.5]), m=np.array([10]))
    cost = slot_energy_cost(decision, chan, cfg)
    scaled, new_cost, violated = enforce_energy_budget(decision, cost, np.array([0.0]), chan, cfg)
    assert violated[0]
    assert scaled.f[0] == 0.0
    assert scaled.m[0] == 0
    assert new_cost.c_total[0] == pytest.approx(0.1)


def test_enforce_energy_budget_within_battery_untouched():
    cfg = small_config()
    chan = make_chan([[1e-10]], [0], 1)
    decision = Decision(y=np.array([0]), z=np.zeros((1, 1)), f=np.array([0.5]), m=np.array([0]))
    cost = slot_energy_cost(decision, chan, cfg)
    same, same_cost, violated = enforce_energy_budget(decision, cost, np.array([20.0]), chan, cfg)
    assert same is decision
    assert not violated.any()


@pytest.mark.parametrize(
    "battery, harvest, cost, expected",
    [(10.0, 2.0, 5.0, 7.0), (19.0, 5.0, 0.0, 20.0), (1.0, 0.0, 5.0, 0.0)],
)
def test_step_energy(battery, harvest, cost, expected):
    state = make_state([0], battery=[battery])
    assert step_energy(state, np.array([harvest]), np.array([cost]), small_config())[0] == expected


@pytest.mark.parametrize(
    "z, cost, battery, expected",
    [(0.0, 5.0, 10.0, 0.0), (3.0, 5.0, 1.0, 7.0), (0.0, 0.0, 0.0, 0.0)],
)
def test_step_virtual_queue(z, cost, battery, expected):
    state = make_state([0], z_virtual=[z])
    assert step_virtual_queue(state, np.array([cost]), np.array([battery]))[0] == expected


def test_lyapunov():
    state = make_state([3], [4], z_virtual=[2.0])
    assert lyapunov(state) == 14.5


def test_average_latency():
    cfg = small_config()
    latency = average_latency(np.full((10, 1), 100.0), np.full((10, 1), 150.0), cfg)
    assert latency[0] == pytest.approx(2 / 3, rel=1e-12)


def test_average_latency_no_arrivals_is_undefined():
    latency = average_latency(np.zeros((5, 2)), np.zeros((5, 2)), small_config())
    assert np.isnan(latency).all()


def test_average_latency_empty_queue_is_execution_delay():
    cfg = small_config(exec_delay_slots=2.0)
    latency = average_latency(np.zeros((5, 1)), np.ones((5, 1)), cfg)
    assert latency[0] == 2.0


def test_execute_slot_empty_buffer_sends_nothing():
    cfg = small_config()
    chan = make_chan([[gain_for_snr(1023.0, cfg)]], [0], 1)
    state = make_state([0], [0], battery=[20.0])
    decision = Decision(y=np.array([1]), z=np.ones((1, 1)), f=np.zeros(1), m=np.zeros(1, dtype=int))
    after, outcome, transfer, violated = execute_slot(
        state, decision, chan, np.zeros((1, 1)), np.array([0]), np.array([0.0]), cfg
    )
    assert outcome.rates[0] == 0.0
    assert after.q_tu[0] == 0 and after.q_mis[0] == 0


def test_execute_slot_order():
    cfg = small_config()
    chan = make_chan([[gain_for_snr(1023.0, cfg)]], [0], 1)
    state = make_state([600], [60], battery=[3.0], z_virtual=[1.0])
    decision = Decision(y=np.array([1]), z=np.ones((1, 1)), f=np.array([1.0]), m=np.zeros(1, dtype=int))
    after, outcome, transfer, violated = execute_slot(
        state, decision, chan, np.zeros((1, 1)), np.array([7]), np.array([1.5]), cfg
    )
    assert violated[0]
    assert outcome.theta[0] == 500
    assert after.q_tu[0] == 600 - 500 + 7
    c = outcome.c_total[0]
    assert c == pytest.approx(3.0, rel=1e-9)
    # the virtual queue uses the battery before charging
    assert after.z_virtual[0] == pytest.approx(max(1.0 + c - 3.0, 0.0))
    assert after.battery[0] == pytest.approx(min(max(3.0 + 1.5 - c, 0.0), 20.0))
    assert after.q_mis[0] == 60 - outcome.mu[0] + 500


@settings(deadline=None, max_examples=50)
@given(
    q_tu=st.lists(st.integers(0, 5000), min_size=3, max_size=3),
    q_mis=st.lists(st.integers(0, 5000), min_size=3, max_size=3),
    z_virtual=st.floats(0.0, 1e5),
    battery=st.floats(0.0, 20.0),
    harvest=st.floats(0.0, 2.0),
    arrivals=st.lists(st.integers(0, 300), min_size=3, max_size=3),
)
def test_execute_slot_keeps_queues_and_battery_in_range(
    q_tu, q_mis, z_virtual, battery, harvest, arrivals
):
    cfg = small_config(tus_per_mis=(3,), subchannels_per_mis=4, backhaul_ratio=0.5)
    serving = [[gain_for_snr(s, cfg) for s in (10.0, 100.0, 1.0, 50.0)]] * 3
    chan = make_chan(serving, [0, 0, 0], 1, beta_backhaul=np.array([1e-11]))
    state = make_state(q_tu, q_mis, z_virtual=[z_virtual], battery=[battery])
    gamma = np.zeros((1, 4))
    decision = schedule_slot(state, chan, np.array(arrivals), cfg, gamma=gamma)
    after, outcome, transfer, violated = execute_slot(
        state, decision, chan, gamma, np.array(arrivals), np.array([harvest]), cfg
    )
    assert np.all(after.q_tu >= 0) and np.all(after.q_mis >= 0)
    assert np.all(after.z_virtual >= 0)
    assert 0.0 <= after.battery[0] <= cfg.battery_capacity_j
    # only the base power may exceed an almost empty battery
    assert outcome.c_total[0] <= max(battery, cfg.base_power_j_per_slot) + 1e-9
    assert np.all(transfer.completed + transfer.migrated <= np.asarray(q_mis))
