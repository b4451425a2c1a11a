"""Drift-plus-penalty joint offloading and resource allocation."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .._config import ScenarioConfig
from .._model import ChannelRealization, Decision, NetworkState
from ..channel import backhaul_rate, noise_power, subchannel_rates
from ..queueing import offload_capacity, processing_capacity
from ._base import Policy, SlotContext


@dataclass(frozen=True, kw_only=True)
class CellPlan:
    """Every intermediate quantity of one MIS's decision."""

    mis: int
    tus: np.ndarray
    weights: np.ndarray  # (M_k, N)
    z: np.ndarray  # (M_k, N)
    gain_rate: np.ndarray  # G, bits/s
    y: np.ndarray
    rates: np.ndarray  # r, bits/s
    theta: np.ndarray
    f_hat: np.ndarray
    f: np.ndarray
    mu: np.ndarray
    backhaul: float
    m: np.ndarray


def _queue_factor(q_mis, q_tu, cfg: ScenarioConfig):
    delta = np.asarray(q_mis, dtype=float) - q_tu
    return delta * cfg.slot_seconds / cfg.task_bits - cfg.control_v


def _weight_rates(chan, gamma, cfg):
    return subchannel_rates(chan, gamma, cfg, fading=cfg.fading_aware_weights)


def subchannel_weight(
    i: int,
    n: int,
    state: NetworkState,
    chan: ChannelRealization,
    gamma: np.ndarray,
    cfg: ScenarioConfig,
) -> float:
    """
    Weight of TU `i` on subchannel `n` of its home MIS.

    Parameters
    ----------
    i : int
        TU index.
    n : int
        Subchannel index.
    state : NetworkState
        Queue lengths at the start of the slot.
    chan : ChannelRealization
        The slot's gains.
    gamma : ndarray
        Interference estimate (K, N) in W.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    float
        ``((Q_i,k - Q_i) tau / Y - V)`` times the subchannel rate; smaller is
        better.
    """
    rate = _weight_rates(chan, gamma, cfg)[i, n]
    return float(_queue_factor(state.q_mis[i], state.q_tu[i], cfg) * rate)


def _assign(weights: np.ndarray) -> np.ndarray:
    z = np.zeros(weights.shape, dtype=np.int64)
    if weights.shape[0] > 0:
        # argmin keeps the first minimum, so ties go to the lowest TU index
        z[np.argmin(weights, axis=0), np.arange(weights.shape[1])] = 1
    return z


def _cell_weights(tus, state, rates_for_weights, cfg):
    factor = _queue_factor(state.q_mis[tus], state.q_tu[tus], cfg)
    return factor[:, None] * rates_for_weights[tus]


def allocate_subchannels(
    state: NetworkState,
    chan: ChannelRealization,
    gamma: np.ndarray,
    cfg: ScenarioConfig,
    *,
    mis: int,
) -> np.ndarray:
    """
    Give every subchannel of an MIS to the TU with the smallest weight.

    Returns
    -------
    ndarray
        Indicators (M_k, N), rows in the order of ``state.cell(mis)``.
    """
    tus = state.cell(mis)
    return _assign(_cell_weights(tus, state, _weight_rates(chan, gamma, cfg), cfg))


def _offload_decisions(q_mis, q_tu, gain_rate, cfg: ScenarioConfig) -> np.ndarray:
    gain_rate = np.asarray(gain_rate, dtype=float)
    delta = np.asarray(q_mis, dtype=float) - q_tu
    value = delta * gain_rate * cfg.slot_seconds / cfg.task_bits - cfg.control_v * gain_rate
    return (value <= 0).astype(np.int64)


def offload_decision(
    i: int, state: NetworkState, gain_rate: float, cfg: ScenarioConfig
) -> int:
    """
    Offload TU `i` when ``[Q_i,k - Q_i] G tau / Y - V G <= 0``.

    Parameters
    ----------
    i : int
        TU index.
    state : NetworkState
        Queue lengths.
    gain_rate : float
        Aggregate rate G of the TU's assigned subchannels, bits/s.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    int
        1 to offload, 0 otherwise.
    """
    return int(_offload_decisions(state.q_mis[i], state.q_tu[i], gain_rate, cfg))


def _unconstrained_compute(q_mis, z_virtual: float, cfg: ScenarioConfig) -> np.ndarray:
    q_mis = np.asarray(q_mis, dtype=float)
    if z_virtual <= 0:
        return np.where(q_mis > 0, 1.0, 0.0)
    coef = (
        3.0 * cfg.cycles_per_bit * cfg.task_bits * z_virtual * cfg.power_coeff * cfg.cpu_hz**2
    )
    return np.clip(np.sqrt(q_mis / coef), 0.0, 1.0)


def _share_compute(q_mis, f_hat: np.ndarray) -> np.ndarray:
    if f_hat.sum() <= 1.0:
        return f_hat
    root = np.sqrt(np.asarray(q_mis, dtype=float))
    return root / root.sum()


def allocate_compute(state: NetworkState, cfg: ScenarioConfig, *, mis: int) -> np.ndarray:
    """
    Compute shares of the TUs of one MIS.

    Each TU takes ``sqrt(Q_i,k / (3 alpha Y Z_k eps F_k^2))`` clipped to
    ``[0, 1]``; if the shares sum above one they are replaced by
    ``sqrt(Q_i,k) / sum_j sqrt(Q_j,k)``. A zero virtual queue leaves energy
    unconstrained and every backlogged TU asks for the full CPU.

    Returns
    -------
    ndarray
        Shares (M_k,) in the order of ``state.cell(mis)``, summing to at most 1.
    """
    q = state.q_mis[state.cell(mis)]
    return _share_compute(q, _unconstrained_compute(q, state.z_virtual[mis], cfg))


def _migration_threshold(z_virtual: float, backhaul: float, cfg: ScenarioConfig) -> float:
    if backhaul <= 0:
        return math.inf
    return z_virtual * cfg.mis_tx_power_w * cfg.task_bits / backhaul


def _migrations(q_mis, threshold: float, theta, mu) -> np.ndarray:
    room = np.maximum(np.asarray(theta) - mu, 0)
    return np.where(threshold - np.asarray(q_mis, dtype=float) <= 0, room, 0).astype(np.int64)


def migration_decision(
    i: int,
    state: NetworkState,
    backhaul: float,
    theta: int,
    mu: int,
    cfg: ScenarioConfig,
) -> int:
    """
    Tasks TU `i` sends on to the CBS.

    Everything beyond local processing, ``theta - mu``, migrates when
    ``Z_k p_k Y / R_k - Q_i,k <= 0``; a dead backhaul never migrates.

    Returns
    -------
    int
        The migrated task count.
    """
    threshold = _migration_threshold(state.z_virtual[state.home[i]], backhaul, cfg)
    return int(_migrations(state.q_mis[i], threshold, theta, mu))


def control_interference(
    decision: Decision,
    state: NetworkState,
    chan: ChannelRealization,
    cfg: ScenarioConfig,
) -> np.ndarray:
    """
    Subchannels each MIS gives up to limit inter-cell interference.

    Cells plan on their own and so tend to reuse every subchannel. On each
    subchannel the cells whose holder transmits are silenced one at a time,
    always the one whose removal raises the queue-weighted sum rate
    ``sum_k w_k W log2(1 + S_k / (I_k + sigma^2))`` the most, until no removal
    helps. ``w_k = V - (Q_i,k - Q_i) tau / Y`` of the holder and ``I_k`` is
    the interference of the cells still transmitting.

    Parameters
    ----------
    decision : Decision
        Per-cell plans of the slot.
    state : NetworkState
        Queues at the start of the slot.
    chan : ChannelRealization
        The slot's gains.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    ndarray
        Boolean (K, N), true where the MIS drops the subchannel.
    """
    num_mis, n = state.num_mis, cfg.subchannels_per_mis
    weight = -_queue_factor(state.q_mis, state.q_tu, cfg)
    sending = (decision.y == 1) & (state.q_tu > 0) & (weight > 0)
    tus, subchannels = np.nonzero(decision.z * sending[:, None])
    holder = np.full((num_mis, n), -1, dtype=np.int64)
    holder[state.home[tus], subchannels] = tus
    active = holder >= 0
    if num_mis < 2 or not np.any(active.sum(axis=0) > 1):
        return np.zeros_like(active)

    columns = np.arange(n)
    h = np.where(active, holder, 0)
    w = np.where(active, weight[h], 0.0)
    power = cfg.tu_tx_power_w * chan.beta_serving[h, columns]
    signal = power * chan.fading2[h, columns] if cfg.fading_aware_weights else power
    # cross[q, k, n]: what the holder of cell q puts on MIS k
    if cfg.interference_mode == "serving":
        cross = np.repeat(power[:, None, :], num_mis, axis=1)
    else:
        cross = cfg.tu_tx_power_w * chan.beta[h, :, columns].transpose(0, 2, 1)
    cross[np.arange(num_mis), np.arange(num_mis)] = 0.0
    sigma2 = noise_power(cfg, cfg.subchannel_bandwidth_hz)

    def utility(on):
        interference = np.einsum("qn,qkn->kn", on, cross)
        rate = cfg.subchannel_bandwidth_hz * np.log2(1.0 + signal / (interference + sigma2))
        return np.sum(on * w * rate, axis=0)

    on = active.astype(float)
    current = utility(on)
    for _ in range(num_mis - 1):
        trials = np.full((num_mis, n), -np.inf)
        for k in range(num_mis):
            trial = on.copy()
            trial[k] = 0.0
            trials[k] = np.where(on[k] > 0, utility(trial), -np.inf)
        best = np.argmax(trials, axis=0)
        gain = trials[best, columns]
        better = gain > current + 1e-12 * np.abs(current)
        if not better.any():
            break
        on[best[better], columns[better]] = 0.0
        current = np.where(better, gain, current)
    return active & (on == 0)


def plan_cell(
    state: NetworkState,
    chan: ChannelRealization,
    gamma: np.ndarray,
    cfg: ScenarioConfig,
    *,
    mis: int,
    weight_rates: Optional[np.ndarray] = None,
    rates: Optional[np.ndarray] = None,
    z: Optional[np.ndarray] = None,
) -> CellPlan:
    """
    Run the per-MIS decision sequence and keep every intermediate result.

    Subchannels first, then offloading, offload capacity, compute shares and
    finally migration, which needs the processing capacity. A given `z`
    replaces the subchannel assignment.
    """
    if weight_rates is None:
        weight_rates = _weight_rates(chan, gamma, cfg)
    if rates is None:
        rates = subchannel_rates(chan, gamma, cfg, fading=True)

    tus = state.cell(mis)
    q_tu, q_mis = state.q_tu[tus], state.q_mis[tus]
    weights = _cell_weights(tus, state, weight_rates, cfg)
    z = _assign(weights) if z is None else np.array(z, dtype=np.int64)

    plain = (
        subchannel_rates(chan, gamma, cfg, fading=False)
        if cfg.fading_aware_weights
        else weight_rates
    )
    gain_rate = np.sum(z * plain[tus], axis=1)
    y = _offload_decisions(q_mis, q_tu, gain_rate, cfg)

    if cfg.reallocate_idle_subchannels and y.any() and not y.all():
        idle = np.flatnonzero((z * (1 - y)[:, None]).sum(axis=0) > 0)
        z[:, idle] = 0
        candidates = np.where(y[:, None] == 1, weights[:, idle], np.inf)
        z[np.argmin(candidates, axis=0), idle] = 1

    link_rates = y * np.sum(z * rates[tus], axis=1)
    theta = offload_capacity(link_rates, cfg)

    f_hat = _unconstrained_compute(q_mis, state.z_virtual[mis], cfg)
    f = _share_compute(q_mis, f_hat)
    mu = processing_capacity(f, cfg)

    backhaul = float(backhaul_rate(cfg, chan.beta_backhaul[mis]))
    threshold = _migration_threshold(state.z_virtual[mis], backhaul, cfg)
    m = _migrations(q_mis, threshold, theta, mu)

    return CellPlan(
        mis=mis,
        tus=tus,
        weights=weights,
        z=z,
        gain_rate=gain_rate,
        y=y,
        rates=link_rates,
        theta=np.atleast_1d(theta),
        f_hat=f_hat,
        f=f,
        mu=np.atleast_1d(mu),
        backhaul=backhaul,
        m=m,
    )


def _combine(plans, num_tus: int, n: int) -> Decision:
    decision = Decision.idle(num_tus, n)
    for plan in plans:
        decision.y[plan.tus] = plan.y
        decision.z[plan.tus] = plan.z
        decision.f[plan.tus] = plan.f
        decision.m[plan.tus] = plan.m
    return decision


def schedule_slot(
    state: NetworkState,
    chan: ChannelRealization,
    arrivals: np.ndarray,
    cfg: ScenarioConfig,
    *,
    gamma: np.ndarray,
) -> Decision:
    """
    Decide one slot for every MIS.

    With ``interference_control`` the cells then give up the subchannels
    `control_interference` marks and are re-planned on what remains.

    Parameters
    ----------
    state : NetworkState
        Queues at the start of the slot.
    chan : ChannelRealization
        The slot's gains.
    arrivals : ndarray
        Arrivals of the slot; the decision does not depend on them.
    cfg : ScenarioConfig
        The scenario.
    gamma : ndarray
        Interference estimate (K, N) in W.

    Returns
    -------
    Decision
        A feasible decision.
    """
    num_tus, n = len(state.home), cfg.subchannels_per_mis
    weight_rates = _weight_rates(chan, gamma, cfg)
    rates = (
        weight_rates
        if cfg.fading_aware_weights
        else subchannel_rates(chan, gamma, cfg, fading=True)
    )
    plans = [
        plan_cell(state, chan, gamma, cfg, mis=k, weight_rates=weight_rates, rates=rates)
        for k in range(state.num_mis)
    ]
    decision = _combine(plans, num_tus, n)
    if not cfg.interference_control or state.num_mis < 2:
        return decision

    silenced = control_interference(decision, state, chan, cfg)
    for k in np.flatnonzero(silenced.any(axis=1)):
        z = plans[k].z.copy()
        z[:, silenced[k]] = 0
        plans[k] = plan_cell(
            state, chan, gamma, cfg, mis=k, weight_rates=weight_rates, rates=rates, z=z
        )
    return _combine(plans, num_tus, n)


def mu_max(cfg: ScenarioConfig) -> int:
    return processing_capacity(1.0, cfg)


def theta_max(cfg: ScenarioConfig) -> int:
    """Offload capacity of one TU holding every subchannel at the best possible gain."""
    free_space = (cfg.wavelength_mis_m / (4.0 * np.pi * cfg.mis_antenna_m)) ** 2
    snr = (
        cfg.tu_tx_power_w
        * free_space
        * cfg.fading_power_cap
        / noise_power(cfg, cfg.subchannel_bandwidth_hz)
    )
    rate = cfg.subchannels_per_mis * cfg.subchannel_bandwidth_hz * np.log2(1.0 + snr)
    return offload_capacity(rate, cfg)


def drift_bound_constant(
    cfg: ScenarioConfig,
    *,
    theta_bound: Optional[float] = None,
    mu_bound: Optional[float] = None,
) -> float:
    """
    Constant of the one-slot Lyapunov drift bound.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario; supplies ``E_max``, ``g^max`` and the TU layout.
    theta_bound : float, optional
        Largest offload capacity; derived from `cfg` when omitted.
    mu_bound : float, optional
        Largest processing capacity; derived from `cfg` when omitted.

    Returns
    -------
    float
        ``sum_k {E_max^2 + sum_i [theta_max^2 + g_max^2 + mu_max^2 / 2]}``.
    """
    if theta_bound is None:
        theta_bound = theta_max(cfg)
    if mu_bound is None:
        mu_bound = mu_max(cfg)
    per_tu = (
        float(theta_bound) ** 2
        + float(cfg.max_arrivals) ** 2
        + 0.5 * float(mu_bound) ** 2
    )
    return cfg.num_mis * cfg.battery_capacity_j**2 + cfg.num_tus * per_tu


class JCORA(Policy):
    """Joint computation offloading and resource allocation."""

    def _schedule(self, ctx: SlotContext) -> Decision:
        return schedule_slot(ctx.state, ctx.chan, ctx.arrivals, ctx.cfg, gamma=ctx.gamma)
