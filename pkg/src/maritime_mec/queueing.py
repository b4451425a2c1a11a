"""Task, energy and virtual queue dynamics of the MIS tier."""
import logging
from typing import Tuple

import numpy as np

from ._config import ScenarioConfig
from ._error import make_error
from ._model import (
    ChannelRealization,
    Decision,
    EnergyCost,
    NetworkState,
    SlotOutcome,
    Transfer,
)
from .channel import backhaul_rate, subchannel_rates

logger = logging.getLogger(__name__)

# Guards floor() against products such as 49.999999999 that are integral in exact arithmetic.
_FLOOR_EPS = 1e-9


def _floor_tasks(x):
    out = np.floor(np.asarray(x, dtype=float) + _FLOOR_EPS).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def offload_capacity(rate, cfg: ScenarioConfig):
    """Tasks a rate can move in one slot, ``floor(r tau / Y)``."""
    return _floor_tasks(np.asarray(rate, dtype=float) * cfg.slot_seconds / cfg.task_bits)


def processing_capacity(f, cfg: ScenarioConfig):
    """Tasks a compute share can finish in one slot, ``floor(f F tau / (alpha Y))``."""
    return _floor_tasks(
        np.asarray(f, dtype=float)
        * cfg.cpu_hz
        * cfg.slot_seconds
        / (cfg.cycles_per_bit * cfg.task_bits)
    )


def compute_energy(f, cfg: ScenarioConfig):
    """Energy in J of running compute share `f` for one slot."""
    return cfg.power_coeff * (np.asarray(f, dtype=float) * cfg.cpu_hz) ** 3 * cfg.slot_seconds


def slot_energy_cost(
    decision: Decision, chan: ChannelRealization, cfg: ScenarioConfig
) -> EnergyCost:
    """
    Energy every MIS spends in the slot.

    Parameters
    ----------
    decision : Decision
        The control action.
    chan : ChannelRealization
        The slot's gains; only the backhaul gain is used.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    EnergyCost
        Base, transmission and computation energy per MIS, in J.

    Raises
    ------
    InfeasibleMigrationError
        If an MIS migrates tasks while its backhaul rate is zero.
    """
    num_mis = len(chan.beta_backhaul)
    c_com = np.bincount(
        chan.home, weights=compute_energy(decision.f, cfg), minlength=num_mis
    )
    migrated_bits = np.bincount(
        chan.home, weights=decision.m * cfg.task_bits, minlength=num_mis
    )
    rate = np.atleast_1d(backhaul_rate(cfg, chan.beta_backhaul))
    c_tra = np.zeros(num_mis)
    for k in range(num_mis):
        if migrated_bits[k] > 0:
            if rate[k] <= 0:
                raise make_error(
                    "E0201", {"mis": k, "tasks": int(migrated_bits[k] / cfg.task_bits)}
                )
            c_tra[k] = cfg.mis_tx_power_w * migrated_bits[k] / rate[k]
    return EnergyCost(
        c_bas=np.full(num_mis, cfg.base_power_j_per_slot), c_tra=c_tra, c_com=c_com
    )


def enforce_energy_budget(
    decision: Decision,
    cost: EnergyCost,
    battery: np.ndarray,
    chan: ChannelRealization,
    cfg: ScenarioConfig,
) -> Tuple[Decision, EnergyCost, np.ndarray]:
    """
    Shrink compute, then migration, until each MIS spends at most its battery.

    Parameters
    ----------
    decision : Decision
        The scheduled action.
    cost : EnergyCost
        Its energy cost.
    battery : ndarray
        Battery level ``E_k(t)`` before the slot.
    chan : ChannelRealization
        The slot's gains.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    decision : Decision
        The executable action.
    cost : EnergyCost
        Its energy cost.
    violated : ndarray
        Boolean mask of the MISs that had to be scaled.
    """
    violated = cost.c_total > battery + 1e-12
    if not violated.any():
        return decision, cost, violated

    f = decision.f.astype(float).copy()
    m = decision.m.copy()
    for k in np.flatnonzero(violated):
        cell = chan.home == k
        available = battery[k] - cost.c_bas[k]
        if available <= 0:
            f[cell] = 0.0
            m[cell] = 0
        elif cost.c_bas[k] + cost.c_tra[k] <= battery[k]:
            scale = np.cbrt((available - cost.c_tra[k]) / cost.c_com[k])
            f[cell] *= scale
        else:
            f[cell] = 0.0
            m[cell] = np.floor(m[cell] * available / cost.c_tra[k]).astype(m.dtype)
        logger.debug(
            "MIS %d over budget in slot %d: needs %.4g J, holds %.4g J",
            k,
            chan.slot,
            cost.c_total[k],
            battery[k],
        )

    decision = decision.with_compute(f, m)
    return decision, slot_energy_cost(decision, chan, cfg), violated


def step_task_queues(
    state: NetworkState, outcome: SlotOutcome, cfg: ScenarioConfig
) -> Tuple[NetworkState, Transfer]:
    """
    Advance the TU and MIS task queues by one slot.

    In ``conservative`` mode the MIS queue receives only what the TU could
    send, ``min(theta, Q_i)``; ``literal`` mode adds the raw capacity.

    Returns
    -------
    state : NetworkState
        State with the new queue lengths; energy fields are untouched.
    transfer : Transfer
        Tasks that actually moved.
    """
    q_tu, q_mis = state.q_tu, state.q_mis
    sent = np.minimum(outcome.theta, q_tu)
    admitted = sent if cfg.queue_mode == "conservative" else outcome.theta

    completed = np.minimum(outcome.mu, q_mis)
    migrated = np.minimum(outcome.m, q_mis - completed)

    next_tu = np.maximum(q_tu - outcome.theta, 0) + outcome.arrivals
    next_mis = np.maximum(q_mis - outcome.mu - outcome.m, 0) + admitted

    dropped = np.zeros_like(next_tu)
    if np.isfinite(cfg.tu_buffer_tasks):
        overflow = np.maximum(next_tu - int(cfg.tu_buffer_tasks), 0)
        next_tu = next_tu - overflow
        dropped = dropped + overflow
    if np.isfinite(cfg.mis_buffer_tasks):
        overflow = np.maximum(next_mis - int(cfg.mis_buffer_tasks), 0)
        next_mis = next_mis - overflow
        dropped = dropped + overflow

    new_state = NetworkState(
        slot=state.slot + 1,
        q_tu=next_tu.astype(np.int64),
        q_mis=next_mis.astype(np.int64),
        z_virtual=state.z_virtual,
        battery=state.battery,
        home=state.home,
    )
    return new_state, Transfer(
        sent=sent, completed=completed, migrated=migrated, dropped=dropped
    )


def step_energy(
    state: NetworkState, harvest: np.ndarray, c_total: np.ndarray, cfg: ScenarioConfig
) -> np.ndarray:
    """Battery after charging and spending, clamped to ``[0, E_max]``."""
    return np.minimum(
        np.maximum(0.0, state.battery + harvest - c_total), cfg.battery_capacity_j
    )


def step_virtual_queue(
    state: NetworkState, c_total: np.ndarray, battery: np.ndarray
) -> np.ndarray:
    """Virtual energy queue update; `battery` is the level before this slot."""
    return np.maximum(state.z_virtual + c_total - battery, 0.0)


def lyapunov(state: NetworkState) -> float:
    """Quadratic Lyapunov function of all real and virtual queues."""
    return 0.5 * float(
        np.sum(np.square(state.z_virtual))
        + np.sum(np.square(state.q_tu.astype(float)))
        + np.sum(np.square(state.q_mis.astype(float)))
    )


def _latency_from_means(mean_queue, mean_arrivals, cfg: ScenarioConfig) -> np.ndarray:
    mean_queue = np.asarray(mean_queue, dtype=float)
    mean_arrivals = np.asarray(mean_arrivals, dtype=float)
    latency = np.full(mean_queue.shape, np.nan)
    defined = mean_arrivals > 0
    latency[defined] = mean_queue[defined] / mean_arrivals[defined] + cfg.exec_delay_slots
    return latency


def average_latency(q_history, g_history, cfg: ScenarioConfig) -> np.ndarray:
    """
    Little's-law latency of every TU, in slots.

    Parameters
    ----------
    q_history : array-like
        Total backlog ``Q_i + Q_i,k`` per slot, shape (T, M).
    g_history : array-like
        Arrivals per slot, shape (T, M).
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    ndarray
        Latency per TU; NaN where the TU never received a task.
    """
    q_history = np.atleast_2d(np.asarray(q_history, dtype=float))
    g_history = np.atleast_2d(np.asarray(g_history, dtype=float))
    return _latency_from_means(q_history.mean(axis=0), g_history.mean(axis=0), cfg)


def execute_slot(
    state: NetworkState,
    decision: Decision,
    chan: ChannelRealization,
    gamma: np.ndarray,
    arrivals: np.ndarray,
    harvest: np.ndarray,
    cfg: ScenarioConfig,
):
    """
    Apply one decision: transmit, compute and migrate, charge, update queues.

    Returns
    -------
    state : NetworkState
        The state of the next slot.
    outcome : SlotOutcome
        Capacities and energy of the executed action.
    transfer : Transfer
        Tasks that actually moved.
    violated : ndarray
        MISs whose action had to be scaled to the battery.
    """
    cost = slot_energy_cost(decision, chan, cfg)
    decision, cost, violated = enforce_energy_budget(
        decision, cost, state.battery, chan, cfg
    )

    # a TU with an empty buffer has nothing to put on its subchannels
    sending = decision.y * (state.q_tu > 0)
    rates = sending * np.sum(decision.z * subchannel_rates(chan, gamma, cfg), axis=1)
    outcome = SlotOutcome(
        rates=rates,
        theta=offload_capacity(rates, cfg),
        mu=processing_capacity(decision.f, cfg),
        m=np.asarray(decision.m, dtype=np.int64),
        arrivals=np.asarray(arrivals, dtype=np.int64),
        harvest=harvest,
        cost=cost,
    )

    battery = step_energy(state, harvest, outcome.c_total, cfg)
    z_virtual = step_virtual_queue(state, outcome.c_total, state.battery)
    queued, transfer = step_task_queues(state, outcome, cfg)
    next_state = NetworkState(
        slot=queued.slot,
        q_tu=queued.q_tu,
        q_mis=queued.q_mis,
        z_virtual=z_virtual,
        battery=battery,
        home=state.home,
    )
    return next_state, outcome, transfer, violated
