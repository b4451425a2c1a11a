from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


@dataclass(frozen=True, kw_only=True)
class Topology:
    """Static TU placement; TU ``i`` is served by MIS ``home[i]`` for the whole run."""

    offset: np.ndarray  # d_i^0, m
    speed: np.ndarray  # v_i, m/s
    home: np.ndarray
    mis_cbs_distance: np.ndarray  # per MIS, m

    @property
    def num_tus(self) -> int:
        return len(self.home)

    @property
    def num_mis(self) -> int:
        return len(self.mis_cbs_distance)

    def cell(self, mis: int) -> np.ndarray:
        return np.flatnonzero(self.home == mis)


@dataclass(frozen=True, kw_only=True)
class ChannelRealization:
    slot: int
    beta: np.ndarray  # (M, K, N), large-scale gain of TU i towards MIS k
    fading2: np.ndarray  # (M, N), |h|^2 on the serving link
    beta_backhaul: np.ndarray  # (K,)
    home: np.ndarray

    @property
    def beta_serving(self) -> np.ndarray:
        return self.beta[np.arange(len(self.home)), self.home, :]


@dataclass(frozen=True, kw_only=True)
class NetworkState:
    slot: int
    q_tu: np.ndarray  # Q_i
    q_mis: np.ndarray  # Q_{i,k}, indexed by TU
    z_virtual: np.ndarray  # Z_k
    battery: np.ndarray  # E_k
    home: np.ndarray

    @classmethod
    def initial(cls, home: np.ndarray, num_mis: int) -> "NetworkState":
        num_tus = len(home)
        return cls(
            slot=0,
            q_tu=np.zeros(num_tus, dtype=np.int64),
            q_mis=np.zeros(num_tus, dtype=np.int64),
            z_virtual=np.zeros(num_mis),
            battery=np.zeros(num_mis),
            home=np.asarray(home, dtype=np.int64),
        )

    @property
    def num_mis(self) -> int:
        return len(self.battery)

    def cell(self, mis: int) -> np.ndarray:
        return np.flatnonzero(self.home == mis)


@dataclass(frozen=True, kw_only=True)
class Decision:
    """
    The control action of one slot for every TU of every MIS.

    ``z`` is binary except for time-shared decisions, where entries are
    time shares in [0, 1].
    """

    y: np.ndarray  # (M,)
    z: np.ndarray  # (M, N)
    f: np.ndarray  # (M,)
    m: np.ndarray  # (M,)
    time_shared: bool = False

    @classmethod
    def idle(cls, num_tus: int, num_subchannels: int) -> "Decision":
        return cls(
            y=np.zeros(num_tus, dtype=np.int64),
            z=np.zeros((num_tus, num_subchannels)),
            f=np.zeros(num_tus),
            m=np.zeros(num_tus, dtype=np.int64),
        )

    def with_compute(self, f: np.ndarray, m: np.ndarray) -> "Decision":
        return Decision(y=self.y, z=self.z, f=f, m=m, time_shared=self.time_shared)


@dataclass(frozen=True, kw_only=True)
class EnergyCost:
    c_bas: np.ndarray
    c_tra: np.ndarray
    c_com: np.ndarray

    @property
    def c_total(self) -> np.ndarray:
        return self.c_bas + self.c_tra + self.c_com


@dataclass(frozen=True, kw_only=True)
class SlotOutcome:
    rates: np.ndarray  # r_{i,k}(t), bits/s
    theta: np.ndarray
    mu: np.ndarray
    m: np.ndarray
    arrivals: np.ndarray
    harvest: np.ndarray
    cost: EnergyCost

    @property
    def c_total(self) -> np.ndarray:
        return self.cost.c_total


@dataclass(frozen=True, kw_only=True)
class Transfer:
    """Tasks that actually moved in a slot, limited by what the queues held."""

    sent: np.ndarray
    completed: np.ndarray
    migrated: np.ndarray
    dropped: np.ndarray


@dataclass(frozen=True, kw_only=True)
class SlotRecord:
    slot: int
    rates: np.ndarray
    throughput: float  # H(t)
    q_tu: np.ndarray
    q_mis: np.ndarray
    battery: np.ndarray
    z_virtual: np.ndarray
    c_total: np.ndarray
    gamma_estimate: float
    gamma_realized: float
    violations: int
    completed: int
    migrated: int
    dropped: int


@dataclass(frozen=True, kw_only=True)
class RunSummary:
    policy: str
    seed: int
    slots: int
    avg_throughput: float
    avg_throughput_warm: float
    goodput: float
    avg_latency: Optional[float]
    latency: List[Optional[float]]
    avg_queue: float
    avg_queue_warm: float
    avg_queue_tu: List[float]
    avg_energy: float
    avg_harvest: float
    avg_battery: float
    final_z_over_t: float
    z_over_t: List[float]
    violation_rate: float
    monitors: Dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "slots": self.slots,
            "avg_throughput": self.avg_throughput,
            "avg_throughput_warm": self.avg_throughput_warm,
            "goodput_diagnostic": self.goodput,
            "avg_latency": self.avg_latency,
            "latency": self.latency,
            "avg_queue": self.avg_queue,
            "avg_queue_warm": self.avg_queue_warm,
            "avg_queue_tu": self.avg_queue_tu,
            "avg_energy": self.avg_energy,
            "avg_harvest": self.avg_harvest,
            "avg_battery": self.avg_battery,
            "final_z_over_t": self.final_z_over_t,
            "z_over_t": self.z_over_t,
            "violation_rate": self.violation_rate,
            "monitors": self.monitors,
        }


@dataclass(frozen=True, kw_only=True)
class Mismatch:
    """A scheduler decision that disagrees with the brute-force optimum."""

    code: str
    message: str
    instance: int
    mis: int
