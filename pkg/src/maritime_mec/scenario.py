"""Topology construction and random-stream management."""
from enum import IntEnum
from typing import Dict, Optional, Tuple

import numpy as np

from ._config import ScenarioConfig
from ._model import Topology


class Phenomenon(IntEnum):
    TOPOLOGY = 0
    ARRIVALS = 1
    FADING = 2
    HARVEST = 3


class RandomStreams:
    """
    Independent random streams keyed by (phenomenon, entity).

    Each stream is seeded from the root seed and its key alone, so drawing
    more numbers from one stream never shifts another.

    Parameters
    ----------
    seed : int
        The root seed.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._streams: Dict[Tuple[int, int], np.random.Generator] = {}

    def stream(self, phenomenon: Phenomenon, entity: int = 0) -> np.random.Generator:
        key = (int(phenomenon), int(entity))
        rng = self._streams.get(key)
        if rng is None:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=key)
            )
            self._streams[key] = rng
        return rng


def split_tus(total: int, num_mis: int) -> Tuple[int, ...]:
    """Spread `total` TUs over `num_mis` MISs, remainder to the lowest indices."""
    base, extra = divmod(int(total), int(num_mis))
    return tuple(base + (1 if k < extra else 0) for k in range(num_mis))


def build_topology(
    cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None
) -> Topology:
    """
    Place every TU in the coverage of its home MIS.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario.
    rng : Generator, optional
        Source of the initial offsets; defaults to the topology stream of
        ``cfg.seed``.

    Returns
    -------
    Topology
        Offsets drawn uniformly in ``[0, R_k]``.
    """
    if rng is None:
        rng = RandomStreams(cfg.seed).stream(Phenomenon.TOPOLOGY)

    home = np.repeat(np.arange(cfg.num_mis), cfg.tus_per_mis).astype(np.int64)
    offset = rng.uniform(0.0, cfg.coverage_radius_m, size=len(home))
    return Topology(
        offset=offset,
        speed=np.full(len(home), cfg.tu_speed_mps),
        home=home,
        mis_cbs_distance=np.full(cfg.num_mis, cfg.mis_cbs_distance_m),
    )
