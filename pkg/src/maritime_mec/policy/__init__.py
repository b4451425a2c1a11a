from typing import Dict, Type

from .._config import POLICIES, ScenarioConfig
from .._error import make_error
from ._base import Policy, SlotContext, check_feasibility, iter_violations
from ._baselines import FRA, LRA, PRA, TRA, baseline_schedule
from ._jcora import (
    JCORA,
    CellPlan,
    allocate_compute,
    allocate_subchannels,
    control_interference,
    drift_bound_constant,
    migration_decision,
    mu_max,
    offload_decision,
    plan_cell,
    schedule_slot,
    subchannel_weight,
    theta_max,
)

REGISTRY: Dict[str, Type[Policy]] = {
    "JCORA": JCORA,
    "FRA": FRA,
    "LRA": LRA,
    "PRA": PRA,
    "TRA": TRA,
}


def get_policy(name: str, cfg: ScenarioConfig) -> Policy:
    """
    Build a fresh policy by name.

    Parameters
    ----------
    name : str
        One of ``JCORA``, ``FRA``, ``LRA``, ``PRA`` or ``TRA``, any case.
    cfg : ScenarioConfig
        The scenario the policy will run in.

    Returns
    -------
    Policy
        A new instance; stateful policies start from scratch.
    """
    cls = REGISTRY.get(name.upper())
    if cls is None:
        raise make_error(
            "C0006", {"field": "control.policy", "choices": ", ".join(POLICIES), "value": name}
        )
    return cls(cfg)


__all__ = [
    "CellPlan",
    "FRA",
    "JCORA",
    "LRA",
    "PRA",
    "Policy",
    "REGISTRY",
    "SlotContext",
    "TRA",
    "allocate_compute",
    "allocate_subchannels",
    "baseline_schedule",
    "check_feasibility",
    "control_interference",
    "drift_bound_constant",
    "get_policy",
    "iter_violations",
    "migration_decision",
    "mu_max",
    "offload_decision",
    "plan_cell",
    "schedule_slot",
    "subchannel_weight",
    "theta_max",
]
