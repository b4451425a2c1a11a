"""Run-time checks of the analytical guarantees along a trajectory."""
import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._config import ScenarioConfig
from ._model import NetworkState, SlotOutcome
from .policy import drift_bound_constant
from .queueing import _latency_from_means, lyapunov

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class SlotStep:
    """One executed slot as seen by a monitor."""

    before: NetworkState
    after: NetworkState
    outcome: SlotOutcome
    violated: np.ndarray  # MISs whose action was scaled to the battery


class Monitor(metaclass=ABCMeta):
    """Abstract trajectory monitor."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.slots = 0

    @abstractmethod
    def _observe(self, step: SlotStep) -> None:
        pass

    def observe(self, step: SlotStep) -> None:
        self._observe(step)
        self.slots += 1

    @abstractmethod
    def report(self) -> dict:
        """
        Summarize the observed slots.

        Returns
        -------
        dict
            JSON-friendly values.
        """

    @property
    def name(self):
        return self.__class__.__name__


class DriftBoundMonitor(Monitor):
    """
    Check the one-slot Lyapunov drift against its analytical upper bound.

    The bound is ``C + sum_k Z_k (c_k - E_k) + sum_i Q_i (g_i - theta_i)
    + sum_i Q_i,k (theta_i - mu_i - m_i)`` with ``E_k`` the battery level
    before the slot.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario.
    constant : float, optional
        The bound's constant; derived from `cfg` when omitted.
    """

    def __init__(self, cfg: ScenarioConfig, constant: Optional[float] = None) -> None:
        super().__init__(cfg)
        self.constant = drift_bound_constant(cfg) if constant is None else constant
        self.violations = 0
        self.max_excess = -np.inf
        self.first_violation: Optional[int] = None

    def bound(self, step: SlotStep) -> float:
        before, outcome = step.before, step.outcome
        q_tu = before.q_tu.astype(float)
        q_mis = before.q_mis.astype(float)
        return float(
            self.constant
            + np.dot(before.z_virtual, outcome.c_total - before.battery)
            + np.dot(q_tu, outcome.arrivals - outcome.theta)
            + np.dot(q_mis, outcome.theta - outcome.mu - outcome.m)
        )

    def _observe(self, step: SlotStep) -> None:
        drift = lyapunov(step.after) - lyapunov(step.before)
        excess = drift - self.bound(step)
        self.max_excess = max(self.max_excess, excess)
        if excess > 1e-9 * max(1.0, abs(drift)):
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = step.before.slot
                logger.warning(
                    "Drift bound exceeded in slot %d by %.6g", step.before.slot, excess
                )

    def report(self) -> dict:
        return {
            "constant": self.constant,
            "slots": self.slots,
            "violations": self.violations,
            "max_excess": float(self.max_excess) if self.slots else None,
            "first_violation": self.first_violation,
        }


class VirtualQueueMonitor(Monitor):
    """Track the virtual energy queues and the long-run energy balance."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        super().__init__(cfg)
        self.energy = np.zeros(cfg.num_mis)
        self.battery = np.zeros(cfg.num_mis)
        self.z_virtual = np.zeros(cfg.num_mis)
        self.trajectory: List[List[float]] = []

    def _observe(self, step: SlotStep) -> None:
        self.energy += step.outcome.c_total
        self.battery += step.before.battery
        self.z_virtual = step.after.z_virtual
        self.trajectory.append(step.after.z_virtual.tolist())

    def report(self) -> dict:
        slots = max(self.slots, 1)
        avg_energy = self.energy / slots
        avg_battery = self.battery / slots
        return {
            "slots": self.slots,
            "z_over_t": (self.z_virtual / slots).tolist(),
            "avg_energy": avg_energy.tolist(),
            "avg_battery": avg_battery.tolist(),
            "balanced": bool(np.all(avg_energy <= avg_battery + 1e-9)),
        }


class LatencyMonitor(Monitor):
    """Per-TU latency from Little's law, against each TU's threshold."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        super().__init__(cfg)
        self.queue = np.zeros(cfg.num_tus)
        self.arrivals = np.zeros(cfg.num_tus)

    def _observe(self, step: SlotStep) -> None:
        self.queue += step.after.q_tu + step.after.q_mis
        self.arrivals += step.outcome.arrivals

    def latency(self) -> np.ndarray:
        slots = max(self.slots, 1)
        return _latency_from_means(self.queue / slots, self.arrivals / slots, self.cfg)

    def report(self) -> dict:
        latency = self.latency()
        defined = np.isfinite(latency)
        over = defined & (latency > self.cfg.latency_threshold_slots)
        return {
            "slots": self.slots,
            "threshold": self.cfg.latency_threshold_slots,
            "latency": [float(v) if np.isfinite(v) else None for v in latency],
            "over_threshold": np.flatnonzero(over).tolist(),
        }


class EnergyClampMonitor(Monitor):
    """
    Share of slots in which some MIS had to be scaled to its battery.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario.
    trailing : float, default=0.5
        Fraction of the most recent slots the rate is measured over.
    """

    def __init__(self, cfg: ScenarioConfig, trailing: float = 0.5) -> None:
        super().__init__(cfg)
        self.trailing = trailing
        self.flags: List[bool] = []

    def _observe(self, step: SlotStep) -> None:
        self.flags.append(bool(np.any(step.violated)))

    def rate(self) -> float:
        if not self.flags:
            return 0.0
        count = max(1, int(np.ceil(len(self.flags) * self.trailing)))
        return float(np.mean(self.flags[-count:]))

    def report(self) -> dict:
        return {
            "slots": self.slots,
            "trailing": self.trailing,
            "rate": self.rate(),
            "total": int(np.sum(self.flags)),
        }


MONITORS = {
    "drift": DriftBoundMonitor,
    "virtual_queue": VirtualQueueMonitor,
    "latency": LatencyMonitor,
    "energy_clamp": EnergyClampMonitor,
}


def default_monitors(cfg: ScenarioConfig) -> List[Monitor]:
    return [cls(cfg) for cls in MONITORS.values()]
