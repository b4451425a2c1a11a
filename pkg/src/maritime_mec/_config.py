"""Scenario configuration for the maritime MEC simulator."""
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Tuple, Union

import tomli
import tomli_w

from ._error import make_error

POLICIES = ("JCORA", "FRA", "LRA", "PRA", "TRA")
ARRIVAL_MODES = ("uniform", "poisson")
INTERFERENCE_MODES = ("serving", "physical")
QUEUE_MODES = ("conservative", "literal")

SECTIONS = (
    "network",
    "radio",
    "channel",
    "energy",
    "compute",
    "traffic",
    "control",
    "model",
    "simulation",
)


def _param(default, section, unit, doc, check=None, **kwargs):
    return field(
        default=default,
        metadata={"section": section, "unit": unit, "doc": doc, "check": check},
        **kwargs,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """
    All physical, protocol and algorithm parameters of a scenario.

    Instances are immutable and validated on construction. Every field is
    documented with its config section and unit through the field metadata.
    """

    # network
    num_mis: int = _param(5, "network", "count", "Number of MISs (K).", "positive")
    subchannels_per_mis: int = _param(
        30, "network", "count", "Subchannels per MIS (N).", "positive"
    )
    tus_per_mis: Tuple[int, ...] = _param(
        (2, 2, 2, 2, 2), "network", "count", "TUs under each MIS (M_k).", None
    )
    coverage_radius_m: float = _param(
        400.0, "network", "m", "Coverage radius of an MIS (R_k).", "positive"
    )
    mis_cbs_distance_m: float = _param(
        1200.0, "network", "m", "Fixed MIS-to-CBS distance.", "positive"
    )
    mis_spacing_m: float = _param(
        800.0,
        "network",
        "m",
        "Lane spacing of MIS centers, used by physical interference.",
        "positive",
    )
    tu_speed_mps: float = _param(
        5.0, "network", "m/s", "Sailing speed of a TU (v_i).", "nonnegative"
    )
    # radio
    subchannel_bandwidth_hz: float = _param(
        1e6, "radio", "Hz", "Bandwidth of one MIS subchannel (W).", "positive"
    )
    cbs_bandwidth_hz: float = _param(
        1e8, "radio", "Hz", "Overall CBS spectrum (W_c).", "positive"
    )
    backhaul_ratio: float = _param(
        0.1, "radio", "fraction", "Share of CBS spectrum given to an MIS (rho_k).", "unit"
    )
    noise_psd_dbm_hz: float = _param(
        -174.0, "radio", "dBm/Hz", "Noise power spectral density.", None
    )
    tu_tx_power_w: float = _param(
        0.1, "radio", "W", "TU transmit power per subchannel (p_i,k^n).", "positive"
    )
    mis_tx_power_w: float = _param(
        1.0, "radio", "W", "MIS transmit power towards the CBS (p_k).", "positive"
    )
    # channel
    rician_k: float = _param(
        10.0, "channel", "linear", "Rician factor (K_r).", "nonnegative"
    )
    tu_antenna_m: float = _param(
        10.0, "channel", "m", "TU antenna height (h_i).", "positive"
    )
    mis_antenna_m: float = _param(
        50.0, "channel", "m", "MIS antenna height (h_k).", "positive"
    )
    cbs_antenna_m: float = _param(
        100.0, "channel", "m", "CBS antenna height.", "positive"
    )
    wavelength_mis_m: float = _param(
        0.125, "channel", "m", "Wavelength of MIS subchannels (lambda_k,n).", "positive"
    )
    wavelength_cbs_m: float = _param(
        0.02, "channel", "m", "Wavelength of the CBS link (lambda_c,k).", "positive"
    )
    # energy
    battery_capacity_j: float = _param(
        20.0, "energy", "J", "Maximum energy storage (E_max).", "positive"
    )
    max_charge_j_per_slot: float = _param(
        2.0, "energy", "J/slot", "Maximum harvest per slot (e_k^max).", "nonnegative"
    )
    base_power_j_per_slot: float = _param(
        0.1, "energy", "J/slot", "Maintenance energy per slot (c_k^bas).", "nonnegative"
    )
    # compute
    cpu_hz: float = _param(
        1e9, "compute", "cycles/s", "MIS computing frequency (F_k).", "positive"
    )
    power_coeff: float = _param(
        1e-25, "compute", "J*s^2/cycle^3", "Chip power coefficient (epsilon).", "positive"
    )
    cycles_per_bit: float = _param(
        1000.0, "compute", "cycles/bit", "CPU cycles per task bit (alpha).", "positive"
    )
    exec_delay_slots: float = _param(
        0.0, "compute", "slots", "Constant execution delay (T^c).", "nonnegative"
    )
    # traffic
    task_bits: float = _param(1000.0, "traffic", "bits", "Task size (Y).", "positive")
    max_arrivals: int = _param(
        300, "traffic", "tasks/slot", "Upper bound of task arrivals (g^max).", "nonnegative"
    )
    arrival_mode: str = _param(
        "uniform", "traffic", "-", "Arrival pmf over {0..g^max}.", ARRIVAL_MODES
    )
    arrival_mean: float = _param(
        150.0,
        "traffic",
        "tasks/slot",
        "Mean of the truncated Poisson arrival mode.",
        "nonnegative",
    )
    latency_threshold_slots: float = _param(
        20.0, "traffic", "slots", "Latency requirement (T_i^th).", "positive"
    )
    tu_buffer_tasks: float = _param(
        math.inf, "traffic", "tasks", "TU buffer size (Q_i^max).", "positive"
    )
    mis_buffer_tasks: float = _param(
        math.inf, "traffic", "tasks", "MIS buffer size per TU (Q_i,k^max).", "positive"
    )
    # control
    control_v: float = _param(
        0.1, "control", "-", "Drift-plus-penalty weight (V).", "nonnegative"
    )
    policy: str = _param("JCORA", "control", "-", "Scheduling policy.", POLICIES)
    fading_aware_weights: bool = _param(
        False, "control", "-", "Include |h|^2 in subchannel weights.", None
    )
    reallocate_idle_subchannels: bool = _param(
        False, "control", "-", "Hand idle subchannels to offloading TUs.", None
    )
    interference_control: bool = _param(
        True, "control", "-", "Drop subchannel reuse that lowers the weighted sum rate.", None
    )
    # model
    interference_mode: str = _param(
        "serving", "model", "-", "Gain used for inter-cell interference.", INTERFERENCE_MODES
    )
    queue_mode: str = _param(
        "conservative",
        "model",
        "-",
        "MIS queue input: min(theta, Q_i) or raw theta.",
        QUEUE_MODES,
    )
    fading_power_cap: float = _param(
        50.0, "model", "linear", "Bound on |h|^2 used for theta^max.", "positive"
    )
    oracle_grid: int = _param(
        100, "model", "steps", "Compute grid resolution of the oracle.", "positive"
    )
    oracle_budget: float = _param(
        1e7, "model", "points", "Largest enumeration the oracle accepts.", "positive"
    )
    # simulation
    horizon_slots: int = _param(
        1000, "simulation", "slots", "Number of simulated slots (T).", "positive"
    )
    slot_seconds: float = _param(0.05, "simulation", "s", "Slot length (tau).", "positive")
    warmup_fraction: float = _param(
        0.1,
        "simulation",
        "fraction",
        "Leading share of slots excluded from warm-up averages.",
        "unit",
    )
    seed: int = _param(
        0, "simulation", "-", "Root seed of all random streams.", "nonnegative"
    )

    def __post_init__(self):
        if not isinstance(self.tus_per_mis, tuple):
            object.__setattr__(self, "tus_per_mis", tuple(self.tus_per_mis))
        _validate(self)

    @property
    def num_tus(self) -> int:
        return sum(self.tus_per_mis)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def __repr__(self):
        return "ScenarioConfig({})".format(
            ", ".join(f"{k}={v!r}" for k, v in config_to_dict(self).items())
        )


def iter_fields() -> Iterator[dataclasses.Field]:
    return iter(dataclasses.fields(ScenarioConfig))


def _key(f: dataclasses.Field) -> str:
    return "{}.{}".format(f.metadata["section"], f.name)


def _validate(cfg: ScenarioConfig) -> None:
    for f in iter_fields():
        value = getattr(cfg, f.name)
        check = f.metadata["check"]
        key = _key(f)
        if f.type in (int, "int") and (
            isinstance(value, bool) or not isinstance(value, int)
        ):
            raise make_error(
                "C0009", {"field": key, "expected": "an integer", "value": value}
            )
        if f.type in (float, "float") and (
            isinstance(value, bool) or not isinstance(value, (int, float))
        ):
            raise make_error("C0009", {"field": key, "expected": "a number", "value": value})
        if f.type in (bool, "bool") and not isinstance(value, bool):
            raise make_error("C0009", {"field": key, "expected": "a boolean", "value": value})

        if check == "positive" and not value > 0:
            raise make_error("C0001", {"field": key, "value": value})
        elif check == "nonnegative" and not value >= 0:
            raise make_error("C0002", {"field": key, "value": value})
        elif check == "unit" and not 0 <= value <= 1:
            raise make_error("C0003", {"field": key, "value": value})
        elif isinstance(check, tuple) and value not in check:
            raise make_error(
                "C0006", {"field": key, "choices": ", ".join(check), "value": value}
            )

    key = "network.tus_per_mis"
    if len(cfg.tus_per_mis) != cfg.num_mis:
        raise make_error(
            "C0004",
            {"field": key, "actual": len(cfg.tus_per_mis), "expected": cfg.num_mis},
        )
    for count in cfg.tus_per_mis:
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise make_error(
                "C0009",
                {"field": key, "expected": "non-negative integers", "value": count},
            )


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    """Flat field-name mapping, JSON friendly."""
    out = {}
    for f in iter_fields():
        value = getattr(cfg, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def config_from_dict(values: Mapping[str, Any]) -> ScenarioConfig:
    names = {f.name: f for f in iter_fields()}
    for name in values:
        if name not in names:
            raise make_error("C0005", {"field": name})
    return ScenarioConfig(**values)


def config_to_sections(cfg: ScenarioConfig) -> Dict[str, Dict[str, Any]]:
    sections = {section: {} for section in SECTIONS}
    for f in iter_fields():
        value = getattr(cfg, f.name)
        sections[f.metadata["section"]][f.name] = (
            list(value) if isinstance(value, tuple) else value
        )
    return sections


def dump_config(cfg: ScenarioConfig) -> str:
    """
    Serialize a configuration as TOML.

    Parameters
    ----------
    cfg : ScenarioConfig
        The configuration.

    Returns
    -------
    str
        TOML text that `load_config` parses back to an equal configuration.
    """
    return tomli_w.dumps(config_to_sections(cfg))


def save_config(cfg: ScenarioConfig, path: Path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


def parse_config(text: str, path: str = "<string>") -> ScenarioConfig:
    try:
        document = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise make_error("C0007", {"path": path, "reason": str(e)}) from e

    fields = {f.name: f for f in iter_fields()}
    values = {}
    for section, table in document.items():
        if section not in SECTIONS or not isinstance(table, dict):
            raise make_error("C0005", {"field": section})
        for name, value in table.items():
            f = fields.get(name)
            if f is None or f.metadata["section"] != section:
                raise make_error("C0005", {"field": f"{section}.{name}"})
            if f.type in (float, "float") and isinstance(value, int) and not isinstance(
                value, bool
            ):
                value = float(value)
            if name == "tus_per_mis":
                if not isinstance(value, list):
                    raise make_error(
                        "C0009",
                        {"field": f"{section}.{name}", "expected": "a list", "value": value},
                    )
                value = tuple(value)
            values[name] = value
    return ScenarioConfig(**values)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Load and validate a TOML scenario file.

    Parameters
    ----------
    path : str or Path
        The file, or the literal ``"default"`` for the built-in defaults.

    Returns
    -------
    ScenarioConfig
        The validated configuration; absent keys keep their defaults.
    """
    if str(path) == "default":
        return ScenarioConfig()

    path = Path(path)
    if not path.is_file():
        raise make_error("C0010", {"path": str(path)})
    return parse_config(path.read_text(encoding="utf-8"), path=str(path))
