import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from maritime_mec._error import ConfigError, FeasibilityError
from maritime_mec._model import Decision
from maritime_mec.policy import (
    FRA,
    JCORA,
    LRA,
    PRA,
    REGISTRY,
    TRA,
    SlotContext,
    baseline_schedule,
    check_feasibility,
    get_policy,
    iter_violations,
)
from maritime_mec.queueing import processing_capacity

from common import gain_for_snr, make_chan, make_state, small_config


def _context(cfg, state, *, arrivals=None, slot_gains=None):
    num_tus, n = len(state.home), cfg.subchannels_per_mis
    gains = np.full((num_tus, n), 1e-10) if slot_gains is None else slot_gains
    chan = make_chan(gains, state.home, state.num_mis, slot=state.slot)
    return SlotContext(
        state=state,
        chan=chan,
        gamma=np.zeros((state.num_mis, n)),
        arrivals=np.zeros(num_tus, dtype=int) if arrivals is None else np.asarray(arrivals),
        cfg=cfg,
    )


def test_fra_single_backlogged_tu():
    cfg = small_config(tus_per_mis=(2,), subchannels_per_mis=3)
    decision = FRA(cfg).schedule(_context(cfg, make_state([5, 0], [0, 0])))
    assert decision.y.tolist() == [1, 0]
    np.testing.assert_array_equal(decision.z, [[1, 1, 1], [0, 0, 0]])
    assert decision.f.tolist() == [1.0, 0.0]
    assert decision.m.tolist() == [0, 0]


def test_fra_serves_earliest_backlog_first():
    cfg = small_config(tus_per_mis=(2,), subchannels_per_mis=2)
    policy = FRA(cfg)
    first = policy.schedule(_context(cfg, make_state([0, 4], slot=0)))
    assert first.y.tolist() == [0, 1]
    second = policy.schedule(_context(cfg, make_state([9, 2], slot=1)))
    assert second.y.tolist() == [0, 1]
    third = policy.schedule(_context(cfg, make_state([9, 0], slot=2)))
    assert third.y.tolist() == [1, 0]


def test_fra_head_of_line_ties_to_lowest_index():
    onset = np.array([3.0, 1.0, 1.0, np.inf])
    assert FRA.head_of_line(onset, np.array([0, 1, 2, 3])) == 1
    assert FRA.head_of_line(onset, np.array([3])) is None


def test_tra_equal_shares():
    cfg = small_config(tus_per_mis=(4,), subchannels_per_mis=3)
    decision = TRA(cfg).schedule(_context(cfg, make_state([1, 0, 2, 0])))
    assert decision.time_shared
    np.testing.assert_array_equal(decision.f, [0.25] * 4)
    assert decision.f.sum() == 1.0
    np.testing.assert_array_equal(decision.z, np.full((4, 3), 0.25))


def test_pra_service_order():
    order = PRA.service_order(np.array([10, 50, 30]), np.array([0, 1, 2]))
    assert order.tolist() == [1, 2, 0]


def test_pra_takes_best_subchannels_until_queue_fits():
    cfg = small_config(tus_per_mis=(2,), subchannels_per_mis=3)
    # SNR 1, 3 and 7 carry 50, 100 and 150 tasks per slot
    gains = np.array([[gain_for_snr(s, cfg) for s in (1.0, 3.0, 7.0)]] * 2)
    state = make_state([200, 10], [10, 0])
    decision = PRA(cfg).schedule(_context(cfg, state, arrivals=[5, 1], slot_gains=gains))
    # TU 0 needs two subchannels, the best two; TU 1 gets the remaining one
    np.testing.assert_array_equal(decision.z, [[0, 1, 1], [1, 0, 0]])
    assert decision.y.tolist() == [1, 1]
    assert processing_capacity(decision.f[0], cfg) >= 10
    assert decision.f[1] == 0.0


def test_pra_runs_out_of_cpu():
    cfg = small_config(tus_per_mis=(2,), subchannels_per_mis=1)
    state = make_state([0, 0], [40, 40])
    decision = PRA(cfg).schedule(_context(cfg, state, arrivals=[0, 3]))
    assert decision.f[1] == pytest.approx(40.5 / 50)
    assert decision.f.sum() == pytest.approx(1.0)


def test_lra_round_robin_and_latency_share():
    cfg = small_config(tus_per_mis=(2,), subchannels_per_mis=3)
    decision = LRA(cfg).schedule(_context(cfg, make_state([3, 0], [100, 50], slot=1)))
    np.testing.assert_array_equal(np.argmax(decision.z, axis=0), [1, 0, 1])
    np.testing.assert_allclose(decision.f, [0.1, 0.05])
    assert decision.y.tolist() == [1, 0]


def test_lra_normalizes_compute():
    cfg = small_config(tus_per_mis=(2,), latency_threshold_slots=1.0)
    decision = LRA(cfg).schedule(_context(cfg, make_state([0, 0], [100, 300])))
    np.testing.assert_allclose(decision.f, [0.5, 0.5])


def test_baseline_schedule_by_name():
    cfg = small_config(tus_per_mis=(2,))
    decision = baseline_schedule("tra", _context(cfg, make_state([1, 1])))
    assert decision.time_shared


def test_get_policy():
    cfg = small_config()
    assert isinstance(get_policy("jcora", cfg), JCORA)
    assert set(REGISTRY) == {"JCORA", "FRA", "LRA", "PRA", "TRA"}
    with pytest.raises(ConfigError) as e:
        get_policy("greedy", cfg)
    assert e.value.code == "C0006"


def test_check_feasibility_rejects_shared_subchannel():
    cfg = small_config(tus_per_mis=(2,))
    chan = make_chan(np.full((2, 1), 1e-10), [0, 0], 1)
    decision = Decision(y=np.array([1, 1]), z=np.ones((2, 1)), f=np.zeros(2), m=np.zeros(2, dtype=int))
    with pytest.raises(FeasibilityError) as e:
        check_feasibility(decision, chan, np.zeros((1, 1)), cfg)
    assert e.value.code == "F0104"


def test_iter_violations_lists_every_violation():
    cfg = small_config(tus_per_mis=(2,))
    chan = make_chan(np.full((2, 1), 1e-10), [0, 0], 1)
    decision = Decision(
        y=np.array([2, 0]), z=np.array([[0.5], [0.0]]), f=np.array([0.8, 0.7]), m=np.array([0, 5])
    )
    codes = [e.code for e in iter_violations(decision, chan, np.zeros((1, 1)), cfg)]
    assert codes == ["F0101", "F0103", "F0105", "F0106"]


def test_iter_violations_wrong_size():
    cfg = small_config(tus_per_mis=(2,))
    chan = make_chan(np.full((2, 1), 1e-10), [0, 0], 1)
    codes = [e.code for e in iter_violations(Decision.idle(3, 1), chan, np.zeros((1, 1)), cfg)]
    assert codes == ["F0107"]


@settings(deadline=None, max_examples=40)
@given(
    name=st.sampled_from(["FRA", "LRA", "PRA", "TRA"]),
    q_tu=st.lists(st.integers(0, 3000), min_size=4, max_size=4),
    q_mis=st.lists(st.integers(0, 3000), min_size=4, max_size=4),
    arrivals=st.lists(st.integers(0, 300), min_size=4, max_size=4),
    slot=st.integers(0, 50),
)
def test_baselines_always_feasible(name, q_tu, q_mis, arrivals, slot):
    cfg = small_config(num_mis=2, tus_per_mis=(3, 1), subchannels_per_mis=3)
    state = make_state(q_tu, q_mis, home=[0, 0, 0, 1], slot=slot)
    ctx = _context(cfg, state, arrivals=arrivals)
    decision = get_policy(name, cfg).schedule(ctx)
    assert not list(iter_violations(decision, ctx.chan, ctx.gamma, cfg))
    assert np.all(decision.m == 0)
