"""Exhaustive per-slot optimization on small instances.

Two services: the joint minimizer of the per-slot objective over a
discretized action space, and a per-subproblem audit of the scheduler that
fixes every variable but one at the scheduler's own choice.
"""
import itertools
import math
from dataclasses import dataclass, replace
from typing import Dict, Generator, List, Optional, Tuple

import numpy as np

from ._config import ScenarioConfig
from ._error import format_message, make_error
from ._model import ChannelRealization, Decision, Mismatch, NetworkState
from .channel import (
    backhaul_rate,
    noise_power,
    sample_channel,
    subchannel_rates,
    uplink_rate,
)
from .policy import check_feasibility, plan_cell, schedule_slot, subchannel_weight
from .queueing import (
    compute_energy,
    offload_capacity,
    processing_capacity,
    slot_energy_cost,
)
from .scenario import RandomStreams, build_topology

MAX_MIS = 2
MAX_TUS_PER_MIS = 3
MAX_SUBCHANNELS = 3


@dataclass(frozen=True, kw_only=True)
class SmallInstance:
    """One slot of a network small enough to enumerate."""

    state: NetworkState
    chan: ChannelRealization
    gamma: np.ndarray  # (K, N), W
    cfg: ScenarioConfig


def _default_gamma(gamma, cfg: ScenarioConfig) -> np.ndarray:
    if gamma is None:
        return np.zeros((cfg.num_mis, cfg.subchannels_per_mis))
    return gamma


def p2_objective(
    state: NetworkState,
    decision: Decision,
    chan: ChannelRealization,
    cfg: ScenarioConfig,
    *,
    gamma: Optional[np.ndarray] = None,
) -> float:
    """
    Per-slot drift-plus-penalty objective of a decision.

    Terms that no decision can change, ``Q_i g_i`` and ``Z_k E_k``, are
    dropped.

    Parameters
    ----------
    state : NetworkState
        Queues at the start of the slot.
    decision : Decision
        A feasible decision.
    chan : ChannelRealization
        The slot's gains.
    cfg : ScenarioConfig
        The scenario.
    gamma : ndarray, optional
        Interference (K, N) in W; zero when omitted.

    Returns
    -------
    float
        ``sum_k Z_k c_k - V sum_i r_i + sum_i (Q_i,k - Q_i) theta_i
        - sum_i Q_i,k (mu_i + m_i)``.

    Raises
    ------
    FeasibilityError
        If the decision breaks a constraint.
    """
    return float(np.sum(p2_cell_objectives(state, decision, chan, cfg, gamma=gamma)))


def p2_cell_objectives(
    state: NetworkState,
    decision: Decision,
    chan: ChannelRealization,
    cfg: ScenarioConfig,
    *,
    gamma: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Terms of `p2_objective` that belong to each MIS and its TUs, shape (K,)."""
    gamma = _default_gamma(gamma, cfg)
    check_feasibility(decision, chan, gamma, cfg)
    cost = slot_energy_cost(decision, chan, cfg)
    rates = decision.y * np.sum(decision.z * subchannel_rates(chan, gamma, cfg), axis=1)
    theta = offload_capacity(rates, cfg)
    mu = processing_capacity(decision.f, cfg)
    q_tu = state.q_tu.astype(float)
    q_mis = state.q_mis.astype(float)
    per_tu = -cfg.control_v * rates + (q_mis - q_tu) * theta - q_mis * (mu + decision.m)
    per_mis = np.bincount(state.home, weights=per_tu, minlength=state.num_mis)
    return state.z_virtual * cost.c_total + per_mis


def p2_objective_decomposed(
    state: NetworkState,
    decision: Decision,
    chan: ChannelRealization,
    cfg: ScenarioConfig,
    *,
    gamma: Optional[np.ndarray] = None,
) -> float:
    """Same objective as `p2_objective`, accumulated TU by TU from scalar rates."""
    gamma = _default_gamma(gamma, cfg)
    check_feasibility(decision, chan, gamma, cfg)
    backhaul = np.atleast_1d(backhaul_rate(cfg, chan.beta_backhaul))
    total = 0.0
    for k in range(state.num_mis):
        energy = cfg.base_power_j_per_slot
        for i in state.cell(k):
            rate = uplink_rate(decision.y[i], decision.z[i], chan, gamma[k], cfg, tu=i)
            theta = offload_capacity(rate, cfg)
            mu = processing_capacity(decision.f[i], cfg)
            m = int(decision.m[i])
            energy += cfg.power_coeff * (decision.f[i] * cfg.cpu_hz) ** 3 * cfg.slot_seconds
            if m > 0:
                if backhaul[k] <= 0:
                    raise make_error("E0201", {"mis": k, "tasks": m})
                energy += cfg.mis_tx_power_w * m * cfg.task_bits / backhaul[k]
            q_tu, q_mis = float(state.q_tu[i]), float(state.q_mis[i])
            total += -cfg.control_v * rate + (q_mis - q_tu) * theta - q_mis * (mu + m)
        total += state.z_virtual[k] * energy
    return float(total)


def enumeration_size(cfg: ScenarioConfig) -> int:
    """Objective evaluations of the joint search, summed over MISs."""
    n, grid = cfg.subchannels_per_mis, cfg.oracle_grid
    return sum(2**mk * (mk + 1) ** n * (grid + 1) * max(mk, 1) for mk in cfg.tus_per_mis)


def check_instance_limits(cfg: ScenarioConfig) -> None:
    """Raise if an instance is too large for exhaustive search."""
    if cfg.num_mis > MAX_MIS:
        reason = f"{cfg.num_mis} MISs, at most {MAX_MIS}"
    elif max(cfg.tus_per_mis, default=0) > MAX_TUS_PER_MIS:
        reason = f"{max(cfg.tus_per_mis)} TUs under one MIS, at most {MAX_TUS_PER_MIS}"
    elif cfg.subchannels_per_mis > MAX_SUBCHANNELS:
        reason = f"{cfg.subchannels_per_mis} subchannels, at most {MAX_SUBCHANNELS}"
    else:
        reason = None
    if reason is not None:
        raise make_error("O0302", {"reason": reason})

    size = enumeration_size(cfg)
    if size > cfg.oracle_budget:
        raise make_error("O0301", {"size": size, "budget": int(cfg.oracle_budget)})


def _min_over_simplex(tables: List[np.ndarray], grid: int) -> Tuple[float, List[int]]:
    """
    Minimize ``sum_j tables[j][g_j]`` subject to ``sum_j g_j <= grid``.

    Ties resolve to the lexicographically smallest ``(g_0, g_1, ...)``.
    """
    steps = np.arange(grid + 1)
    diff = steps[:, None] - steps[None, :]
    valid = diff >= 0
    index = np.where(valid, diff, 0)

    # suffix[j][s]: best value of tables j.. within a budget of s steps
    suffix = [None] * len(tables) + [np.zeros(grid + 1)]
    for j in reversed(range(len(tables))):
        values = np.where(valid, tables[j][None, :] + suffix[j + 1][index], np.inf)
        suffix[j] = values.min(axis=1)

    left, picks = grid, []
    for j, table in enumerate(tables):
        options = np.arange(left + 1)
        pick = int(np.argmin(table[: left + 1] + suffix[j + 1][left - options]))
        picks.append(pick)
        left -= pick
    return float(suffix[0][grid]), picks


class _CellSearch:
    """Joint enumeration for the TUs of a single MIS."""

    def __init__(self, inst: SmallInstance, mis: int, rates: np.ndarray, backhaul: float):
        cfg, state = inst.cfg, inst.state
        self.cfg = cfg
        self.cell = state.cell(mis)
        self.q_tu = state.q_tu[self.cell].astype(float)
        self.q_mis = state.q_mis[self.cell].astype(float)
        self.rates = rates[self.cell]
        self.z_virtual = float(state.z_virtual[mis])
        self.base = self.z_virtual * cfg.base_power_j_per_slot

        grid = np.arange(cfg.oracle_grid + 1) / cfg.oracle_grid
        self.grid = grid
        self.mu_grid = processing_capacity(grid, cfg)
        self.energy_grid = self.z_virtual * compute_energy(grid, cfg)
        if backhaul > 0:
            self.migration_coef = (
                self.z_virtual * cfg.mis_tx_power_w * cfg.task_bits / backhaul - self.q_mis
            )
        else:
            self.migration_coef = None
        self._tables: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
        self._tails: Dict[Tuple[int, ...], Tuple[float, List[int]]] = {}

    def _table(self, j: int, theta: int) -> Tuple[np.ndarray, np.ndarray]:
        key = (j, theta)
        if key not in self._tables:
            if self.migration_coef is None:
                m = np.zeros_like(self.mu_grid)
                migration = np.zeros(len(self.mu_grid))
            else:
                room = np.maximum(theta - self.mu_grid, 0)
                # the objective is linear in m, so an endpoint is optimal
                m = np.where(room * self.migration_coef[j] < 0, room, 0)
                migration = m * self.migration_coef[j]
            values = self.energy_grid - self.q_mis[j] * self.mu_grid + migration
            self._tables[key] = (values, m)
        return self._tables[key]

    def _tail(self, theta: Tuple[int, ...]) -> Tuple[float, List[int]]:
        if theta not in self._tails:
            tables = [self._table(j, t)[0] for j, t in enumerate(theta)]
            self._tails[theta] = _min_over_simplex(tables, self.cfg.oracle_grid)
        return self._tails[theta]

    def search(self):
        mk, n = len(self.cell), self.cfg.subchannels_per_mis
        if mk == 0:
            return self.base, None

        best = None
        for y in itertools.product((0, 1), repeat=mk):
            y_arr = np.array(y, dtype=np.int64)
            for owners in itertools.product(range(-1, mk), repeat=n):
                z = np.zeros((mk, n))
                for channel, owner in enumerate(owners):
                    if owner >= 0:
                        z[owner, channel] = 1.0
                rates = y_arr * np.sum(z * self.rates, axis=1)
                theta = tuple(int(t) for t in np.atleast_1d(offload_capacity(rates, self.cfg)))
                head = -self.cfg.control_v * float(np.sum(rates)) + float(
                    np.dot(self.q_mis - self.q_tu, theta)
                )
                tail, picks = self._tail(theta)
                value = self.base + head + tail
                if best is None or value < best[0]:
                    m = [int(self._table(j, t)[1][picks[j]]) for j, t in enumerate(theta)]
                    best = (value, y_arr, z, picks, m)
        return best[0], best[1:]


def brute_force_slot(inst: SmallInstance) -> Tuple[Decision, float]:
    """
    Globally minimize the per-slot objective over a discretized action space.

    Compute shares move on a grid of ``1 / oracle_grid``; offloading,
    subchannel ownership (including leaving a subchannel unused) and
    migration are enumerated exactly.

    Parameters
    ----------
    inst : SmallInstance
        The instance.

    Returns
    -------
    decision : Decision
        The lexicographically first minimizer.
    value : float
        Its objective value.

    Raises
    ------
    BudgetExceededError
        If the instance exceeds the size limits or the enumeration budget.
    """
    cfg = inst.cfg
    check_instance_limits(cfg)

    num_tus = len(inst.state.home)
    decision = Decision.idle(num_tus, cfg.subchannels_per_mis)
    rates = subchannel_rates(inst.chan, inst.gamma, cfg)
    backhaul = np.atleast_1d(backhaul_rate(cfg, inst.chan.beta_backhaul))

    total = 0.0
    for k in range(inst.state.num_mis):
        search = _CellSearch(inst, k, rates, float(backhaul[k]))
        value, best = search.search()
        total += value
        if best is None:
            continue
        y, z, picks, m = best
        decision.y[search.cell] = y
        decision.z[search.cell] = z
        decision.f[search.cell] = search.grid[picks]
        decision.m[search.cell] = m
    return decision, total


def snap_compute(decision: Decision, grid: int) -> Decision:
    """Round compute shares down onto the oracle grid, keeping the rest."""
    f = np.floor(np.asarray(decision.f) * grid + 1e-9) / grid
    return decision.with_compute(f, decision.m)


def random_instance(
    rng: np.random.Generator, cfg: Optional[ScenarioConfig] = None
) -> SmallInstance:
    """
    Draw a small instance with varied queues, virtual queues, V and backhaul.

    Parameters
    ----------
    rng : Generator
        Source of every random choice.
    cfg : ScenarioConfig, optional
        Physical constants to start from; defaults to the built-in scenario.

    Returns
    -------
    SmallInstance
        At most two MISs, three TUs per MIS and three subchannels.
    """
    base = ScenarioConfig() if cfg is None else cfg
    num_mis = int(rng.integers(1, MAX_MIS + 1))
    cfg = base.replace(
        num_mis=num_mis,
        tus_per_mis=tuple(
            int(m) for m in rng.integers(1, MAX_TUS_PER_MIS + 1, size=num_mis)
        ),
        subchannels_per_mis=int(rng.integers(1, MAX_SUBCHANNELS + 1)),
        control_v=float(rng.choice([0.01, 0.1, 1.0])),
        backhaul_ratio=float(rng.choice([0.0, 0.1, 0.5])),
        reallocate_idle_subchannels=False,
        seed=int(rng.integers(2**31)),
    )

    topo = build_topology(cfg, rng)
    slot = int(rng.integers(0, 1000))
    chan = sample_channel(topo, slot, cfg, RandomStreams(cfg.seed))
    num_tus = topo.num_tus

    def backlog():
        q = rng.integers(0, 5001, size=num_tus)
        return np.where(rng.random(num_tus) < 0.2, 0, q).astype(np.int64)

    z_virtual = np.where(
        rng.random(num_mis) < 0.2, 0.0, 10.0 ** rng.uniform(-1, 5, num_mis)
    )
    state = NetworkState(
        slot=chan.slot,
        q_tu=backlog(),
        q_mis=backlog(),
        z_virtual=z_virtual,
        battery=rng.uniform(0, cfg.battery_capacity_j, num_mis),
        home=topo.home,
    )

    n = cfg.subchannels_per_mis
    if num_mis > 1:
        scale = noise_power(cfg, cfg.subchannel_bandwidth_hz)
        draw = rng.uniform(0, 10 * scale, (num_mis, n))
        gamma = np.where(rng.random((num_mis, n)) < 0.5, 0.0, draw)
    else:
        gamma = np.zeros((num_mis, n))
    return SmallInstance(state=state, chan=chan, gamma=gamma, cfg=cfg)


def _relaxed_compute_objective(f, q_mis, z_virtual: float, cfg: ScenarioConfig):
    f = np.asarray(f, dtype=float)
    energy = z_virtual * cfg.power_coeff * cfg.cpu_hz**3 * cfg.slot_seconds * f**3
    service = q_mis * cfg.cpu_hz * cfg.slot_seconds * f / (cfg.cycles_per_bit * cfg.task_bits)
    return energy - service


def _grid_minimum(q_mis, z_virtual: float, cfg: ScenarioConfig) -> float:
    grid = cfg.oracle_grid
    steps = np.arange(grid + 1)
    total, used = np.zeros(()), np.zeros((), dtype=np.int64)
    for j, q in enumerate(q_mis):
        shape = (1,) * j + (grid + 1,)
        values = _relaxed_compute_objective(steps / grid, q, z_virtual, cfg)
        total = total[..., None] + values.reshape(shape)
        used = used[..., None] + steps.reshape(shape)
    return float(np.min(np.where(used <= grid, total, np.inf)))


def _interior_shares(q_mis, z_virtual: float, cfg: ScenarioConfig) -> np.ndarray:
    if z_virtual > 0:
        coef = (
            3.0
            * cfg.cycles_per_bit
            * cfg.task_bits
            * z_virtual
            * cfg.power_coeff
            * cfg.cpu_hz**2
        )
        return np.clip(np.sqrt(q_mis / coef), 0.0, 1.0)
    return (q_mis > 0).astype(float)


def _grid_gap(num_tus: int, z_virtual: float, cfg: ScenarioConfig) -> float:
    """Largest loss of snapping interior compute shares onto the grid."""
    gap = num_tus * 3.0 * z_virtual * cfg.power_coeff * cfg.cpu_hz**3 * cfg.slot_seconds
    return gap / cfg.oracle_grid**2


def certify_instance(
    inst: SmallInstance, *, instance: int = 0
) -> Generator[Mismatch, None, None]:
    """
    Audit every per-MIS decision of the scheduler against brute force.

    Offloading, subchannel ownership and migration must equal the exhaustive
    optimum of their own subproblem with the other variables fixed. Compute
    shares must reach the grid optimum of the relaxed compute objective within
    the grid's curvature gap when the unconstrained optimum is interior, and
    must follow the square-root rule otherwise.

    Parameters
    ----------
    inst : SmallInstance
        The instance.
    instance : int, default=0
        Index reported with every mismatch.

    Yields
    ------
    Mismatch
        One record per disagreement.
    """
    cfg = inst.cfg.replace(reallocate_idle_subchannels=False)
    state, chan, gamma = inst.state, inst.chan, inst.gamma
    plain = subchannel_rates(chan, gamma, cfg, fading=False)

    def mismatch(code, mis, **args):
        message = format_message(code, dict(args, mis=mis))
        return Mismatch(code=code, message=message, instance=instance, mis=mis)

    for k in range(state.num_mis):
        plan = plan_cell(state, chan, gamma, cfg, mis=k)
        cell, mk, n = plan.tus, len(plan.tus), cfg.subchannels_per_mis
        if mk == 0:
            continue

        weights = np.array(
            [
                [subchannel_weight(i, c, state, chan, gamma, cfg) for c in range(n)]
                for i in cell
            ]
        )
        best_owner, best_value = None, math.inf
        for owners in itertools.product(range(mk), repeat=n):
            value = sum(weights[o, c] for c, o in enumerate(owners))
            if value < best_value:
                best_owner, best_value = owners, value
        for c in range(n):
            actual = int(np.argmax(plan.z[:, c]))
            if plan.z[actual, c] != 1 or actual != best_owner[c]:
                yield mismatch(
                    "V0402",
                    k,
                    subchannel=c,
                    actual=int(cell[actual]),
                    expected=int(cell[best_owner[c]]),
                )

        for j, i in enumerate(cell):
            gain_rate = float(np.sum(plan.z[j] * plain[i]))
            delta = float(state.q_mis[i] - state.q_tu[i])
            best_y, best_value = None, math.inf
            for y in (1, 0):
                value = y * (
                    delta * gain_rate * cfg.slot_seconds / cfg.task_bits
                    - cfg.control_v * gain_rate
                )
                if value < best_value:
                    best_y, best_value = y, value
            if plan.y[j] != best_y:
                yield mismatch("V0401", k, tu=int(i), actual=int(plan.y[j]), expected=best_y)

            room = max(int(plan.theta[j]) - int(plan.mu[j]), 0)
            if plan.backhaul > 0:
                coef = (
                    state.z_virtual[k] * cfg.mis_tx_power_w * cfg.task_bits / plan.backhaul
                    - state.q_mis[i]
                )
                candidates = np.arange(room, -1, -1)
                best_m = int(candidates[np.argmin(candidates * coef)])
            else:
                best_m = 0
            if plan.m[j] != best_m:
                yield mismatch("V0403", k, tu=int(i), actual=int(plan.m[j]), expected=best_m)

        q_mis = state.q_mis[cell].astype(float)
        z_virtual = float(state.z_virtual[k])
        f_hat = _interior_shares(q_mis, z_virtual, cfg)

        if f_hat.sum() <= 1.0:
            actual = float(np.sum(_relaxed_compute_objective(plan.f, q_mis, z_virtual, cfg)))
            expected = _grid_minimum(q_mis, z_virtual, cfg)
            gap = _grid_gap(mk, z_virtual, cfg)
            tolerance = 1e-9 * max(1.0, abs(expected))
            if actual > expected + tolerance or expected - actual > gap + tolerance:
                yield mismatch("V0404", k, actual=actual, expected=expected, gap=gap)
        else:
            root = np.sqrt(q_mis)
            expected = root / root.sum()
            if not np.allclose(plan.f, expected, rtol=1e-12, atol=1e-12):
                yield mismatch(
                    "V0405",
                    k,
                    actual=np.round(plan.f, 6).tolist(),
                    expected=np.round(expected, 6).tolist(),
                )


def certify_joint(
    inst: SmallInstance, *, instance: int = 0
) -> Generator[Mismatch, None, None]:
    """
    Compare the scheduler's objective with the joint optimum, MIS by MIS.

    The scheduler runs single pass with fading-aware weights, so its
    subchannel choice targets the same rates as the objective. Its compute
    shares are snapped onto the oracle grid. The joint optimum may never lie
    above the result. Where no TU gains from migrating and the compute
    optimum is interior the decomposition loses nothing, so the scheduler
    must also come within the grid gap plus the rounding of the integer
    capacities, ``|Q_i,k - Q_i| + Q_i,k`` per TU on either side.

    Parameters
    ----------
    inst : SmallInstance
        The instance.
    instance : int, default=0
        Index reported with every mismatch.

    Yields
    ------
    Mismatch
        One record per disagreeing MIS.
    """
    cfg = inst.cfg.replace(
        reallocate_idle_subchannels=False,
        interference_control=False,
        fading_aware_weights=True,
    )
    inst = replace(inst, cfg=cfg)
    state, chan, gamma = inst.state, inst.chan, inst.gamma
    check_instance_limits(cfg)

    decision = schedule_slot(
        state, chan, np.zeros(len(state.home), dtype=np.int64), cfg, gamma=gamma
    )
    snapped = snap_compute(decision, cfg.oracle_grid)
    actual = p2_cell_objectives(state, snapped, chan, cfg, gamma=gamma)

    rates = subchannel_rates(chan, gamma, cfg)
    backhaul = np.atleast_1d(backhaul_rate(cfg, chan.beta_backhaul))
    for k in range(state.num_mis):
        search = _CellSearch(inst, k, rates, float(backhaul[k]))
        expected, _ = search.search()
        scheduled = float(actual[k])
        tolerance = 1e-9 * max(1.0, abs(expected), abs(scheduled))
        args = dict(mis=k, actual=scheduled, expected=expected)
        if expected > scheduled + tolerance:
            yield Mismatch(
                code="V0406",
                message=format_message("V0406", args),
                instance=instance,
                mis=k,
            )
            continue

        migrating = search.migration_coef is not None and np.any(search.migration_coef < 0)
        f_hat = _interior_shares(search.q_mis, search.z_virtual, cfg)
        if migrating or f_hat.sum() > 1.0:
            continue
        rounding = np.sum(np.abs(search.q_mis - search.q_tu) + search.q_mis)
        allowance = _grid_gap(len(search.cell), search.z_virtual, cfg) + 2.0 * rounding
        if scheduled - expected > allowance + tolerance:
            yield Mismatch(
                code="V0407",
                message=format_message("V0407", dict(args, allowance=allowance)),
                instance=instance,
                mis=k,
            )
