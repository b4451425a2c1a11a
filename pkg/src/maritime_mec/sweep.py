"""Parameter sweeps, policy comparisons and their trend statistics."""
import csv
import itertools
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ._config import POLICIES, ScenarioConfig
from ._error import make_error
from .scenario import split_tus
from .sim import NullSink, run_simulation, write_provenance

logger = logging.getLogger(__name__)

SWEEP_PARAMS = ("control_v", "total_tus", "arrival_mean", "e_max")

METRIC_COLUMNS = (
    "avg_throughput",
    "avg_latency",
    "avg_queue",
    "avg_energy",
    "final_Z_over_T",
    "violation_rate",
)
SWEEP_COLUMNS = ("param", "value", "seed", "policy") + METRIC_COLUMNS
COMPARE_COLUMNS = ("seed", "policy") + METRIC_COLUMNS


def _unknown_param(param):
    return make_error(
        "C0006",
        {"field": "sweep.param", "choices": ", ".join(SWEEP_PARAMS), "value": param},
    )


@dataclass(frozen=True, kw_only=True)
class SweepSpec:
    """
    A grid of runs over one parameter.

    Parameters
    ----------
    param : str
        One of ``control_v``, ``total_tus``, ``arrival_mean`` or ``e_max``.
    values : tuple of float
        Points of the sweep, at least one.
    reps : int, default=1
        Replications per point; replication ``r`` uses seed ``base.seed + r``.
    policies : tuple of str, default=("JCORA",)
        Policies run at every point on identical seeds.
    base : ScenarioConfig
        Configuration every point starts from.
    slots : int, optional
        Horizon override.
    """

    param: str
    values: Tuple[float, ...]
    reps: int = 1
    policies: Tuple[str, ...] = ("JCORA",)
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    slots: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "policies", tuple(p.upper() for p in self.policies))
        if self.param not in SWEEP_PARAMS:
            raise _unknown_param(self.param)
        if len(self.values) < 1:
            raise make_error(
                "C0008", {"field": "sweep.values", "minimum": "one value", "value": "none"}
            )
        if self.reps < 1:
            raise make_error(
                "C0008", {"field": "sweep.reps", "minimum": 1, "value": self.reps}
            )
        for policy in self.policies:
            if policy not in POLICIES:
                raise make_error(
                    "C0006",
                    {"field": "sweep.policy", "choices": ", ".join(POLICIES), "value": policy},
                )


@dataclass(frozen=True, kw_only=True)
class RunPoint:
    param: str
    value: float
    seed: int
    policy: str
    cfg: ScenarioConfig
    slots: Optional[int] = None


def apply_param(cfg: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    """
    Set a swept parameter on a configuration.

    ``total_tus`` spreads the TUs over the MISs, lowest indices first.
    ``arrival_mean`` sets ``g^max = 2 * mean`` in uniform mode, where the mean
    is ``g^max / 2``, and the Poisson mean otherwise. ``e_max`` is the
    largest harvest per slot.
    """
    if param == "control_v":
        return cfg.replace(control_v=float(value))
    if param == "total_tus":
        return cfg.replace(tus_per_mis=split_tus(int(value), cfg.num_mis))
    if param == "arrival_mean":
        if cfg.arrival_mode == "uniform":
            return cfg.replace(
                max_arrivals=int(round(2 * value)), arrival_mean=float(value)
            )
        return cfg.replace(arrival_mean=float(value))
    if param == "e_max":
        return cfg.replace(max_charge_j_per_slot=float(value))
    raise _unknown_param(param)


def expand_sweep(spec: SweepSpec) -> List[RunPoint]:
    points = []
    for value, rep, policy in itertools.product(
        spec.values, range(spec.reps), spec.policies
    ):
        seed = spec.base.seed + rep
        cfg = apply_param(spec.base, spec.param, value).replace(seed=seed, policy=policy)
        points.append(
            RunPoint(
                param=spec.param,
                value=value,
                seed=seed,
                policy=policy,
                cfg=cfg,
                slots=spec.slots,
            )
        )
    return points


def run_point(point: RunPoint) -> Dict[str, object]:
    """Simulate one point and return its result row."""
    summary, _ = run_simulation(point.cfg, slots=point.slots, sink=NullSink())
    return {
        "param": point.param,
        "value": point.value,
        "seed": point.seed,
        "policy": point.policy,
        "avg_throughput": summary.avg_throughput,
        "avg_latency": summary.avg_latency,
        "avg_queue": summary.avg_queue,
        "avg_energy": summary.avg_energy,
        "final_Z_over_T": summary.final_z_over_t,
        "violation_rate": summary.violation_rate,
    }


def _row_key(row):
    return (row["param"], row["value"], row["seed"], POLICIES.index(row["policy"]))


def run_points(points: Sequence[RunPoint], *, workers: Optional[int] = None) -> List[dict]:
    """
    Run points, in parallel when more than one worker is allowed.

    Parameters
    ----------
    points : sequence of RunPoint
        The runs.
    workers : int, optional
        Upper bound on worker processes; ``None`` lets the pool decide and
        ``1`` runs in this process.

    Returns
    -------
    list of dict
        One row per point, ordered by parameter, value, seed and policy.
    """
    rows = []
    if workers == 1 or len(points) <= 1:
        for point in points:
            rows.append(run_point(point))
            logger.info(
                "Finished %s=%s seed %d %s", point.param, point.value, point.seed, point.policy
            )
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(run_point, point): point for point in points}
            for future in as_completed(futures):
                point = futures[future]
                rows.append(future.result())
                logger.info(
                    "Finished %s=%s seed %d %s",
                    point.param,
                    point.value,
                    point.seed,
                    point.policy,
                )
    return sorted(rows, key=_row_key)


def run_sweep(spec: SweepSpec, *, workers: Optional[int] = None) -> List[dict]:
    return run_points(expand_sweep(spec), workers=workers)


def run_compare(
    base: ScenarioConfig,
    *,
    reps: int = 1,
    policies: Sequence[str] = POLICIES,
    slots: Optional[int] = None,
    workers: Optional[int] = None,
) -> List[dict]:
    """
    Run every policy on the same seeds.

    Returns
    -------
    list of dict
        Rows with the ``compare.csv`` columns, ordered by seed then policy.
    """
    points = [
        RunPoint(
            param="",
            value=0.0,
            seed=base.seed + rep,
            policy=policy.upper(),
            cfg=base.replace(seed=base.seed + rep, policy=policy.upper()),
            slots=slots,
        )
        for rep, policy in itertools.product(range(reps), policies)
    ]
    rows = run_points(points, workers=workers)
    return [{k: row[k] for k in COMPARE_COLUMNS} for row in rows]


def trend_statistics(
    rows: Sequence[dict], metric: str, *, policy: Optional[str] = None
) -> dict:
    """
    Rank correlation and linear fit of a metric's per-value means.

    Parameters
    ----------
    rows : sequence of dict
        Sweep rows.
    metric : str
        A metric column.
    policy : str, optional
        Restrict to one policy.

    Returns
    -------
    dict
        ``values``, ``means``, ``spearman`` and the fit's ``slope`` and
        ``r_squared``. Statistics are NaN with fewer than two values.
    """
    groups = defaultdict(list)
    for row in rows:
        if policy is not None and row["policy"] != policy.upper():
            continue
        if row[metric] is not None:
            groups[row["value"]].append(float(row[metric]))

    values = sorted(groups)
    means = [float(np.mean(groups[v])) for v in values]
    result = {
        "values": values,
        "means": means,
        "spearman": float("nan"),
        "slope": float("nan"),
        "r_squared": float("nan"),
    }
    if len(values) >= 2:
        result["spearman"] = float(stats.spearmanr(values, means).correlation)
        fit = stats.linregress(values, means)
        result["slope"] = float(fit.slope)
        result["r_squared"] = float(fit.rvalue**2)
    return result


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_rows(
    path: Union[str, Path],
    rows: Sequence[dict],
    columns: Sequence[str],
    cfg: ScenarioConfig,
    extra: Optional[Dict[str, object]] = None,
) -> None:
    """Write rows as CSV after ``# key = value`` provenance lines."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for key, value in (extra or {}).items():
            handle.write(f"# {key} = {value}\n")
        write_provenance(handle, cfg)
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
