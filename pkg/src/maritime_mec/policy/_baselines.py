"""Comparison policies: FIFO, latency-driven, priority and time-sharing allocation.

None of them migrates tasks or looks at the virtual energy queue; the
battery clamp at execution time keeps them energy feasible.
"""
from typing import Optional, Union

import numpy as np

from .._config import ScenarioConfig
from .._model import Decision
from ..channel import subchannel_rates
from ..queueing import offload_capacity
from ._base import Policy, SlotContext


def _required_share(tasks, cfg: ScenarioConfig) -> np.ndarray:
    """Smallest compute share whose processing capacity reaches `tasks`."""
    tasks = np.asarray(tasks, dtype=float)
    cycles = (tasks + 0.5) * cfg.cycles_per_bit * cfg.task_bits
    share = cycles / (cfg.cpu_hz * cfg.slot_seconds)
    return np.where(tasks > 0, share, 0.0)


class FRA(Policy):
    """
    First-in-first-out allocation.

    Per MIS the TU whose backlog became nonempty earliest holds every
    subchannel and the whole CPU; the others wait. Ties go to the lowest TU
    index.
    """

    def __init__(self, cfg: ScenarioConfig) -> None:
        super().__init__(cfg)
        self._onset: Optional[np.ndarray] = None

    def _update_onset(self, ctx: SlotContext) -> np.ndarray:
        backlog = (ctx.state.q_tu + ctx.state.q_mis) > 0
        if self._onset is None or len(self._onset) != len(backlog):
            self._onset = np.full(len(backlog), np.inf)
        started = backlog & np.isinf(self._onset)
        self._onset[started] = ctx.slot
        self._onset[~backlog] = np.inf
        return self._onset

    @staticmethod
    def head_of_line(onset: np.ndarray, cell: np.ndarray) -> Optional[int]:
        waiting = cell[np.isfinite(onset[cell])]
        if len(waiting) == 0:
            return None
        # stable: equal onsets keep index order
        return int(waiting[np.argsort(onset[waiting], kind="stable")[0]])

    def _schedule(self, ctx: SlotContext) -> Decision:
        onset = self._update_onset(ctx)
        decision = Decision.idle(len(ctx.state.home), ctx.cfg.subchannels_per_mis)
        for k in range(ctx.state.num_mis):
            head = self.head_of_line(onset, ctx.state.cell(k))
            if head is None:
                continue
            decision.y[head] = 1
            decision.z[head] = 1.0
            decision.f[head] = 1.0
        return decision


class LRA(Policy):
    """
    Latency-driven allocation.

    Compute shares are sized to clear each TU's MIS backlog within its
    latency threshold; subchannels rotate round-robin over the TUs of a cell.
    """

    def _schedule(self, ctx: SlotContext) -> Decision:
        cfg, state = ctx.cfg, ctx.state
        n = cfg.subchannels_per_mis
        decision = Decision.idle(len(state.home), n)
        for k in range(state.num_mis):
            cell = state.cell(k)
            if len(cell) == 0:
                continue
            f = np.clip(
                cfg.cycles_per_bit
                * cfg.task_bits
                * state.q_mis[cell]
                / (cfg.cpu_hz * cfg.slot_seconds * cfg.latency_threshold_slots),
                0.0,
                1.0,
            )
            if f.sum() > 1.0:
                f = f / f.sum()
            decision.f[cell] = f

            owner = cell[(np.arange(n) + ctx.slot) % len(cell)]
            decision.z[owner, np.arange(n)] = 1.0
            decision.y[cell] = (state.q_tu[cell] > 0).astype(np.int64)
        return decision


class PRA(Policy):
    """
    Arrival-priority allocation.

    TUs are served in order of this slot's arrivals, largest first. Each in
    turn takes its best remaining subchannels until its queue can be sent and
    enough CPU to finish its MIS backlog, until the cell runs out.
    """

    @staticmethod
    def service_order(arrivals: np.ndarray, cell: np.ndarray) -> np.ndarray:
        return cell[np.argsort(-np.asarray(arrivals)[cell], kind="stable")]

    def _schedule(self, ctx: SlotContext) -> Decision:
        cfg, state = ctx.cfg, ctx.state
        rates = subchannel_rates(ctx.chan, ctx.gamma, cfg)
        decision = Decision.idle(len(state.home), cfg.subchannels_per_mis)
        for k in range(state.num_mis):
            free = np.ones(cfg.subchannels_per_mis, dtype=bool)
            cpu = 1.0
            for i in self.service_order(ctx.arrivals, state.cell(k)):
                if state.q_tu[i] > 0 and free.any():
                    candidates = np.flatnonzero(free)
                    best = candidates[np.argsort(-rates[i, candidates], kind="stable")]
                    capacity = offload_capacity(np.cumsum(rates[i, best]), cfg)
                    enough = np.flatnonzero(capacity >= state.q_tu[i])
                    take = best[: enough[0] + 1] if len(enough) else best
                    decision.z[i, take] = 1.0
                    decision.y[i] = 1
                    free[take] = False

                share = min(cpu, float(_required_share(state.q_mis[i], cfg)))
                decision.f[i] = share
                cpu -= share
        return decision


class TRA(Policy):
    """
    Time-sharing allocation.

    Every TU of a cell holds each subchannel for ``1 / M_k`` of the slot and
    the same share of the CPU.
    """

    def _schedule(self, ctx: SlotContext) -> Decision:
        state = ctx.state
        decision = Decision.idle(len(state.home), ctx.cfg.subchannels_per_mis)
        decision = Decision(
            y=decision.y, z=decision.z, f=decision.f, m=decision.m, time_shared=True
        )
        for k in range(state.num_mis):
            cell = state.cell(k)
            if len(cell) == 0:
                continue
            share = 1.0 / len(cell)
            decision.y[cell] = 1
            decision.z[cell] = share
            decision.f[cell] = share
        return decision


BASELINES = {"FRA": FRA, "LRA": LRA, "PRA": PRA, "TRA": TRA}


def baseline_schedule(policy: Union[str, Policy], ctx: SlotContext) -> Decision:
    """
    Decide one slot with a comparison policy.

    Parameters
    ----------
    policy : str or Policy
        A baseline name, which builds a fresh policy, or an instance that
        carries state across slots.
    ctx : SlotContext
        The observation of the slot.

    Returns
    -------
    Decision
        A feasible decision.
    """
    if isinstance(policy, str):
        policy = BASELINES[policy.upper()](ctx.cfg)
    return policy.schedule(ctx)
