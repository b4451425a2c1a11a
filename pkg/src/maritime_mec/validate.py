import io
from collections import defaultdict
from typing import Dict, Generator, List, Mapping, Optional

import numpy as np

from ._config import ScenarioConfig
from ._model import Mismatch
from .oracle import SmallInstance, certify_instance, certify_joint, random_instance


class Certifier:
    """
    Audit the scheduler on random small instances.

    Parameters
    ----------
    cfg : ScenarioConfig, optional
        Physical constants the instances start from.
    seed : int, default=0
        Seed of the instance generator.
    joint : int, default=20
        How many leading instances are also compared with the joint optimum.
    """

    def __init__(
        self, cfg: Optional[ScenarioConfig] = None, *, seed: int = 0, joint: int = 20
    ) -> None:
        self.cfg = cfg
        self.seed = seed
        self.joint = joint
        self.instances: List[SmallInstance] = []

    def certify(self, count: int) -> Generator[Mismatch, None, None]:
        rng = np.random.default_rng(self.seed)
        for index in range(count):
            inst = random_instance(rng, self.cfg)
            self.instances.append(inst)
            yield from certify_instance(inst, instance=index)
            if index < self.joint:
                yield from certify_joint(inst, instance=index)


class MismatchFormatter:
    def __init__(self):
        self._mismatches: Mapping[int, List[Mismatch]] = defaultdict(list)
        self._instances: Dict[int, SmallInstance] = {}

    def add_mismatch(self, mismatch: Mismatch, inst: Optional[SmallInstance] = None) -> None:
        self._mismatches[mismatch.instance].append(mismatch)
        if inst is not None:
            self._instances[mismatch.instance] = inst

    def _format_mismatch(self, mismatch: Mismatch, inst: Optional[SmallInstance]) -> str:
        return "instance {}:mis {}: {} {}\n".format(
            mismatch.instance, mismatch.mis, mismatch.code, mismatch.message
        )

    def write(self, output: io.TextIOBase, *, certified: int) -> None:
        for index, mismatches in sorted(self._mismatches.items()):
            for mismatch in mismatches:
                output.write(self._format_mismatch(mismatch, self._instances.get(index)))
        output.write(
            "{}/{} instances certified\n".format(certified - self.failed, certified)
        )

    @property
    def has_mismatches(self):
        return len(self._mismatches) > 0

    @property
    def mismatches(self):
        return sum(len(m) for m in self._mismatches.values())

    @property
    def failed(self):
        return len(self._mismatches)


class DetailedMismatchFormatter(MismatchFormatter):
    def _format_mismatch(self, mismatch: Mismatch, inst: Optional[SmallInstance]) -> str:
        if inst is None:
            return super()._format_mismatch(mismatch, inst)

        cfg, state = inst.cfg, inst.state
        cell = state.cell(mismatch.mis)
        lines = [
            "error[{}]: {}\n".format(mismatch.code, mismatch.message),
            "  --> instance {}, MIS {}\n".format(mismatch.instance, mismatch.mis),
            "   | V = {}, rho = {}, N = {}, Z = {!r}\n".format(
                cfg.control_v,
                cfg.backhaul_ratio,
                cfg.subchannels_per_mis,
                float(state.z_virtual[mismatch.mis]),
            ),
        ]
        for i in cell:
            lines.append(
                "   | TU {}: Q = {}, Q_mis = {}\n".format(
                    int(i), int(state.q_tu[i]), int(state.q_mis[i])
                )
            )
        return "".join(lines)


def certify(
    count: int,
    *,
    seed: int = 0,
    cfg: Optional[ScenarioConfig] = None,
    formatter: Optional[MismatchFormatter] = None,
    joint: int = 20,
) -> MismatchFormatter:
    """Certify `count` random instances and collect the mismatches."""
    formatter = MismatchFormatter() if formatter is None else formatter
    certifier = Certifier(cfg, seed=seed, joint=joint)
    for mismatch in certifier.certify(count):
        formatter.add_mismatch(mismatch, certifier.instances[mismatch.instance])
    return formatter
