"""Slotted simulation loop, stochastic inputs and record sinks."""
import csv
import json
import logging
import math
from abc import ABCMeta, abstractmethod
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ._config import ScenarioConfig, config_to_dict
from ._model import NetworkState, RunSummary, SlotRecord
from .channel import interference_matrix, sample_channel
from .monitor import Monitor, SlotStep
from .policy import Policy, SlotContext, get_policy
from .queueing import _latency_from_means, execute_slot
from .scenario import Phenomenon, RandomStreams, build_topology

logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def _truncated_poisson(max_arrivals: int, mean: float) -> np.ndarray:
    pmf = stats.poisson.pmf(np.arange(max_arrivals + 1), mean)
    return pmf / pmf.sum()


def arrival_pmf(cfg: ScenarioConfig) -> np.ndarray:
    """Probabilities of ``0..g^max`` task arrivals in one slot."""
    if cfg.arrival_mode == "poisson" and cfg.arrival_mean > 0:
        return _truncated_poisson(cfg.max_arrivals, float(cfg.arrival_mean))
    if cfg.arrival_mode == "poisson":
        pmf = np.zeros(cfg.max_arrivals + 1)
        pmf[0] = 1.0
        return pmf
    return np.full(cfg.max_arrivals + 1, 1.0 / (cfg.max_arrivals + 1))


def sample_arrivals(
    cfg: ScenarioConfig, rng: np.random.Generator, size: Optional[int] = None
) -> Union[int, np.ndarray]:
    """
    Draw task arrivals from the configured distribution over ``0..g^max``.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario.
    rng : Generator
        The arrival stream.
    size : int, optional
        Number of independent draws; a single int when omitted.

    Returns
    -------
    int or ndarray
        Task counts.
    """
    if cfg.max_arrivals == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    if cfg.arrival_mode == "uniform":
        draw = rng.integers(0, cfg.max_arrivals + 1, size=size)
    else:
        draw = rng.choice(cfg.max_arrivals + 1, size=size, p=arrival_pmf(cfg))
    return int(draw) if size is None else np.asarray(draw, dtype=np.int64)


def sample_harvest(
    cfg: ScenarioConfig, rng: np.random.Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """Harvested energy, uniform on ``[0, e^max]`` J."""
    draw = rng.uniform(0.0, cfg.max_charge_j_per_slot, size=size)
    return float(draw) if size is None else draw


def mean_arrivals(cfg: ScenarioConfig) -> float:
    """Expected arrivals per TU and slot."""
    pmf = arrival_pmf(cfg)
    return float(np.dot(np.arange(len(pmf)), pmf))


class RecordSink(metaclass=ABCMeta):
    """Destination of the slot records of a run."""

    @abstractmethod
    def write(self, record: SlotRecord) -> None:
        pass

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class NullSink(RecordSink):
    def write(self, record: SlotRecord) -> None:
        pass


class MemorySink(RecordSink):
    def __init__(self) -> None:
        self.records: List[SlotRecord] = []

    def write(self, record: SlotRecord) -> None:
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


SLOT_COLUMNS = (
    "slot",
    "throughput",
    "queue_tu",
    "queue_mis",
    "energy",
    "gamma_estimate",
    "gamma_realized",
    "violations",
    "completed",
    "migrated",
    "dropped",
)


def slot_columns(num_mis: int) -> Tuple[str, ...]:
    """Fixed column order of ``slots.csv``; per-MIS columns follow the shared ones."""
    per_mis = tuple(
        f"{name}_{k}" for name in ("battery", "z_virtual", "energy") for k in range(num_mis)
    )
    return SLOT_COLUMNS + per_mis


def provenance(cfg: ScenarioConfig) -> Dict[str, object]:
    return {"seed": cfg.seed, "policy": cfg.policy, **config_to_dict(cfg)}


def write_provenance(handle, cfg: ScenarioConfig) -> None:
    for key, value in provenance(cfg).items():
        handle.write(f"# {key} = {value}\n")


class CsvSink(RecordSink):
    """
    Write one CSV row per slot.

    The file starts with ``# key = value`` comment lines carrying the
    resolved configuration and seed.

    Parameters
    ----------
    path : str or Path
        Output file; its directory must exist.
    cfg : ScenarioConfig
        The configuration of the run.
    """

    def __init__(self, path: Union[str, Path], cfg: ScenarioConfig) -> None:
        self.path = Path(path)
        self._handle = open(self.path, "w", newline="", encoding="utf-8")
        write_provenance(self._handle, cfg)
        self._writer = csv.writer(self._handle)
        self._writer.writerow(slot_columns(cfg.num_mis))

    def write(self, record: SlotRecord) -> None:
        self._writer.writerow(
            [
                record.slot,
                repr(float(record.throughput)),
                int(np.sum(record.q_tu)),
                int(np.sum(record.q_mis)),
                repr(float(np.sum(record.c_total))),
                repr(float(record.gamma_estimate)),
                repr(float(record.gamma_realized)),
                record.violations,
                record.completed,
                record.migrated,
                record.dropped,
                *(repr(float(v)) for v in record.battery),
                *(repr(float(v)) for v in record.z_virtual),
                *(repr(float(v)) for v in record.c_total),
            ]
        )

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def summary_document(summary: RunSummary, cfg: ScenarioConfig) -> dict:
    return _jsonable(
        {"config": config_to_dict(cfg), "seed": cfg.seed, "summary": summary.to_dict()}
    )


def write_summary(path: Union[str, Path], summary: RunSummary, cfg: ScenarioConfig) -> None:
    """Write ``summary.json``; identical runs produce identical bytes."""
    text = json.dumps(summary_document(summary, cfg), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def throughput_metrics(records: Sequence[SlotRecord], cfg: ScenarioConfig) -> dict:
    """
    Throughput aggregates of a sequence of slot records.

    Parameters
    ----------
    records : sequence of SlotRecord
        At least one record.
    cfg : ScenarioConfig
        The scenario, for task size and slot length.

    Returns
    -------
    dict
        ``avg_throughput``, the mean of ``H(t)`` in bits/s, and
        ``goodput_diagnostic``, delivered task bits per second. Goodput is not
        part of the optimization objective.
    """
    slots = len(records)
    throughput = np.array([r.throughput for r in records], dtype=float)
    delivered = sum(r.completed + r.migrated for r in records)
    return {
        "avg_throughput": float(throughput.mean()),
        "goodput_diagnostic": delivered * cfg.task_bits / (slots * cfg.slot_seconds),
    }


class _Accumulator:
    """Running sums behind a `RunSummary`."""

    def __init__(self, cfg: ScenarioConfig, slots: int) -> None:
        self.cfg = cfg
        self.slots = slots
        self.warm_start = int(math.floor(cfg.warmup_fraction * slots))
        self.count = 0
        self.warm_count = 0
        self.throughput = 0.0
        self.throughput_warm = 0.0
        self.queue = 0.0
        self.queue_warm = 0.0
        self.queue_tu = np.zeros(cfg.num_tus)
        self.arrivals = np.zeros(cfg.num_tus)
        self.energy = 0.0
        self.harvest = 0.0
        self.battery = 0.0
        self.clamped = 0
        self.delivered = 0

    def add(self, record: SlotRecord, arrivals: np.ndarray, harvest: np.ndarray) -> None:
        backlog = record.q_tu + record.q_mis
        total = float(np.sum(backlog))
        self.count += 1
        self.throughput += record.throughput
        self.queue += total
        if record.slot >= self.warm_start:
            self.warm_count += 1
            self.throughput_warm += record.throughput
            self.queue_warm += total
        self.queue_tu += backlog
        self.arrivals += arrivals
        self.energy += float(np.sum(record.c_total))
        self.harvest += float(np.sum(harvest))
        self.battery += float(np.mean(record.battery)) if len(record.battery) else 0.0
        self.clamped += record.violations
        self.delivered += record.completed + record.migrated

    def summary(
        self, policy: str, z_virtual: np.ndarray, monitors: Iterable[Monitor]
    ) -> RunSummary:
        cfg, count = self.cfg, self.count
        if count == 0:
            latency = np.full(cfg.num_tus, np.nan)
        else:
            latency = _latency_from_means(self.queue_tu / count, self.arrivals / count, cfg)
        defined = latency[np.isfinite(latency)]

        def mean(total, n):
            return total / n if n else 0.0

        z_over_t = (z_virtual / count).tolist() if count else [0.0] * cfg.num_mis
        return RunSummary(
            policy=policy,
            seed=cfg.seed,
            slots=count,
            avg_throughput=mean(self.throughput, count),
            avg_throughput_warm=mean(self.throughput_warm, self.warm_count),
            goodput=mean(self.delivered * cfg.task_bits, count * cfg.slot_seconds),
            avg_latency=float(defined.mean()) if len(defined) else None,
            latency=[float(v) if np.isfinite(v) else None for v in latency],
            avg_queue=mean(self.queue, count),
            avg_queue_warm=mean(self.queue_warm, self.warm_count),
            avg_queue_tu=(self.queue_tu / count).tolist() if count else [0.0] * cfg.num_tus,
            avg_energy=mean(self.energy, count),
            avg_harvest=mean(self.harvest, count),
            avg_battery=mean(self.battery, count),
            final_z_over_t=max(z_over_t, default=0.0),
            z_over_t=z_over_t,
            violation_rate=mean(self.clamped, count * cfg.num_mis),
            monitors={m.name: m.report() for m in monitors},
        )


def run_simulation(
    cfg: ScenarioConfig,
    *,
    slots: Optional[int] = None,
    sink: Optional[RecordSink] = None,
    monitors: Sequence[Monitor] = (),
    policy: Optional[Policy] = None,
) -> Tuple[RunSummary, RecordSink]:
    """
    Simulate a scenario slot by slot.

    Every slot samples the channel, arrivals and harvest, lets the policy
    decide, clamps the action to the batteries, advances all queues and
    records the result. Queues, batteries and virtual queues start empty.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario, including policy and seed.
    slots : int, optional
        Horizon; defaults to ``cfg.horizon_slots``.
    sink : RecordSink, optional
        Receives every `SlotRecord`; an in-memory sink when omitted.
    monitors : sequence of Monitor, default=()
        Observers of every executed slot; their reports end up in the
        summary.
    policy : Policy, optional
        Overrides the policy named by ``cfg.policy``.

    Returns
    -------
    summary : RunSummary
        Time averages over exactly `slots` slots.
    sink : RecordSink
        The sink the records went to.
    """
    horizon = cfg.horizon_slots if slots is None else int(slots)
    sink = MemorySink() if sink is None else sink
    policy = get_policy(cfg.policy, cfg) if policy is None else policy

    streams = RandomStreams(cfg.seed)
    topo = build_topology(cfg, streams.stream(Phenomenon.TOPOLOGY))
    arrival_streams = [streams.stream(Phenomenon.ARRIVALS, i) for i in range(topo.num_tus)]
    harvest_streams = [streams.stream(Phenomenon.HARVEST, k) for k in range(cfg.num_mis)]

    state = NetworkState.initial(topo.home, cfg.num_mis)
    previous = None
    accumulator = _Accumulator(cfg, horizon)
    logger.info(
        "Running %s for %d slots with %d MISs and %d TUs (seed %d)",
        policy.name,
        horizon,
        cfg.num_mis,
        topo.num_tus,
        cfg.seed,
    )

    for t in range(horizon):
        chan = sample_channel(topo, t, cfg, streams)
        arrivals = np.array(
            [sample_arrivals(cfg, rng) for rng in arrival_streams], dtype=np.int64
        )
        harvest = np.array([sample_harvest(cfg, rng) for rng in harvest_streams])

        if previous is None:
            gamma = np.zeros((cfg.num_mis, cfg.subchannels_per_mis))
        else:
            gamma = interference_matrix(previous, chan, cfg)

        ctx = SlotContext(state=state, chan=chan, gamma=gamma, arrivals=arrivals, cfg=cfg)
        decision = policy.schedule(ctx)
        # only TUs holding tasks transmit; rates see the interference they cause
        transmitting = replace(decision, y=decision.y * (state.q_tu > 0))
        realized = interference_matrix(transmitting, chan, cfg)
        after, outcome, transfer, violated = execute_slot(
            state, decision, chan, realized, arrivals, harvest, cfg
        )

        record = SlotRecord(
            slot=t,
            rates=outcome.rates,
            throughput=float(np.sum(outcome.rates)),
            q_tu=after.q_tu,
            q_mis=after.q_mis,
            battery=after.battery,
            z_virtual=after.z_virtual,
            c_total=outcome.c_total,
            gamma_estimate=float(np.mean(gamma)),
            gamma_realized=float(np.mean(realized)),
            violations=int(np.sum(violated)),
            completed=int(np.sum(transfer.completed)),
            migrated=int(np.sum(transfer.migrated)),
            dropped=int(np.sum(transfer.dropped)),
        )
        sink.write(record)
        accumulator.add(record, arrivals, harvest)
        if monitors:
            step = SlotStep(before=state, after=after, outcome=outcome, violated=violated)
            for monitor in monitors:
                monitor.observe(step)

        state, previous = after, transmitting

    summary = accumulator.summary(policy.name, state.z_virtual, monitors)
    logger.info(
        "%s finished: throughput %.4g bit/s, queue %.4g tasks, clamp rate %.4g",
        policy.name,
        summary.avg_throughput,
        summary.avg_queue,
        summary.violation_rate,
    )
    return summary, sink
