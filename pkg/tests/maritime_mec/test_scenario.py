import numpy as np
from maritime_mec._config import ScenarioConfig
from maritime_mec.scenario import Phenomenon, RandomStreams, build_topology, split_tus


def test_build_topology_same_seed_identical():
    cfg = ScenarioConfig(seed=42)
    a = build_topology(cfg)
    b = build_topology(cfg)
    np.testing.assert_array_equal(a.offset, b.offset)
    np.testing.assert_array_equal(a.home, b.home)


def test_build_topology_five_mis_six_tus():
    cfg = ScenarioConfig(num_mis=5, tus_per_mis=(6,) * 5)
    topo = build_topology(cfg)
    assert topo.num_tus == 30
    assert topo.num_mis == 5
    for k in range(5):
        assert len(topo.cell(k)) == 6
    assert np.all((topo.offset >= 0) & (topo.offset <= cfg.coverage_radius_m))
    np.testing.assert_array_equal(topo.mis_cbs_distance, np.full(5, 1200.0))


def test_build_topology_zero_tus():
    cfg = ScenarioConfig(num_mis=2, tus_per_mis=(0, 0))
    topo = build_topology(cfg)
    assert topo.num_tus == 0
    assert len(topo.offset) == 0
    assert len(topo.cell(0)) == 0


def test_random_streams_independent_of_draw_order():
    a = RandomStreams(7)
    b = RandomStreams(7)
    a.stream(Phenomenon.ARRIVALS, 0).random(100)
    first = a.stream(Phenomenon.ARRIVALS, 1).random(5)
    second = b.stream(Phenomenon.ARRIVALS, 1).random(5)
    np.testing.assert_array_equal(first, second)


def test_random_streams_keys_differ():
    streams = RandomStreams(7)
    x = streams.stream(Phenomenon.FADING, 0).random(5)
    y = streams.stream(Phenomenon.HARVEST, 0).random(5)
    assert not np.array_equal(x, y)


def test_random_streams_returns_same_generator():
    streams = RandomStreams(3)
    assert streams.stream(Phenomenon.TOPOLOGY) is streams.stream(Phenomenon.TOPOLOGY, 0)


def test_split_tus():
    assert split_tus(12, 5) == (3, 3, 2, 2, 2)
    assert split_tus(10, 5) == (2, 2, 2, 2, 2)
    assert split_tus(0, 3) == (0, 0, 0)
    assert sum(split_tus(27, 4)) == 27
