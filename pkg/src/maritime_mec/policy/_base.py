from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import Generator

import numpy as np

from .._config import ScenarioConfig
from .._error import FeasibilityError, make_error
from .._model import ChannelRealization, Decision, NetworkState
from ..channel import subchannel_rates
from ..queueing import offload_capacity, processing_capacity

_TOLERANCE = 1e-9


@dataclass(frozen=True, kw_only=True)
class SlotContext:
    """What a policy may observe at the start of a slot."""

    state: NetworkState
    chan: ChannelRealization
    gamma: np.ndarray  # interference estimate (K, N), W
    arrivals: np.ndarray
    cfg: ScenarioConfig

    @property
    def slot(self) -> int:
        return self.state.slot


def iter_violations(
    decision: Decision,
    chan: ChannelRealization,
    gamma: np.ndarray,
    cfg: ScenarioConfig,
) -> Generator[FeasibilityError, None, None]:
    """
    Yield every constraint a decision breaks.

    Parameters
    ----------
    decision : Decision
        The decision to check.
    chan : ChannelRealization
        The slot's gains, used to derive the offload capacity for (C11).
    gamma : ndarray
        The interference the decision was made with.
    cfg : ScenarioConfig
        The scenario.

    Yields
    ------
    FeasibilityError
        One error per violated constraint instance.
    """
    num_tus = len(chan.home)
    if len(decision.y) != num_tus or decision.z.shape[0] != num_tus:
        yield make_error("F0107", {"actual": len(decision.y), "expected": num_tus})
        return

    for k in range(len(chan.beta_backhaul)):
        cell = chan.home == k
        total = float(np.sum(decision.f[cell]))
        if total > 1 + _TOLERANCE:
            yield make_error("F0101", {"mis": k, "total": total})
        shares = decision.z[cell].sum(axis=0)
        for n in np.flatnonzero(shares > 1 + _TOLERANCE):
            yield make_error(
                "F0104", {"mis": k, "subchannel": int(n), "total": float(shares[n])}
            )

    for i in range(num_tus):
        f = float(decision.f[i])
        if not -_TOLERANCE <= f <= 1 + _TOLERANCE:
            yield make_error("F0102", {"tu": i, "value": f})
        if decision.y[i] not in (0, 1):
            yield make_error("F0103", {"tu": i, "value": decision.y[i]})
        row = decision.z[i]
        if decision.time_shared:
            bad = (row < -_TOLERANCE) | (row > 1 + _TOLERANCE)
        else:
            bad = (row != 0) & (row != 1)
        if bad.any():
            yield make_error("F0105", {"tu": i, "value": float(row[bad][0])})

    rates = decision.y * np.sum(decision.z * subchannel_rates(chan, gamma, cfg), axis=1)
    limit = np.maximum(
        offload_capacity(rates, cfg) - processing_capacity(decision.f, cfg), 0
    )
    for i in np.flatnonzero((decision.m < 0) | (decision.m > limit)):
        yield make_error(
            "F0106", {"tu": int(i), "value": int(decision.m[i]), "limit": int(limit[i])}
        )


def check_feasibility(
    decision: Decision, chan: ChannelRealization, gamma: np.ndarray, cfg: ScenarioConfig
) -> None:
    """Raise the first violation of (C3)-(C7) or (C11), if any."""
    for error in iter_violations(decision, chan, gamma, cfg):
        raise error


class Policy(metaclass=ABCMeta):
    """Abstract per-slot scheduling policy."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg

    @abstractmethod
    def _schedule(self, ctx: SlotContext) -> Decision:
        pass

    def schedule(self, ctx: SlotContext) -> Decision:
        """
        Decide the slot's action.

        Parameters
        ----------
        ctx : SlotContext
            The observation of the slot.

        Returns
        -------
        Decision
            A decision satisfying (C3)-(C7) and (C11).
        """
        decision = self._schedule(ctx)
        check_feasibility(decision, ctx.chan, ctx.gamma, ctx.cfg)
        return decision

    @property
    def name(self):
        return self.__class__.__name__
