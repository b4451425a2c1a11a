"""Maritime two-ray attenuation, Rician fading, interference and link rates."""
import numpy as np

from ._config import ScenarioConfig
from ._error import make_error
from ._model import ChannelRealization, Decision, Topology
from .scenario import Phenomenon, RandomStreams


def noise_power(cfg: ScenarioConfig, bandwidth_hz: float) -> float:
    """Noise power in W over `bandwidth_hz` for the configured PSD."""
    return 10.0 ** ((cfg.noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz


def horizontal_offset(topo: Topology, slot: int, cfg: ScenarioConfig) -> np.ndarray:
    """
    Signed horizontal offset of every TU from its home MIS.

    On the first pass through the coverage this equals the bracket of the
    piecewise distance model; afterwards the TU re-enters from the far edge.
    Time is measured in seconds, ``slot * tau``.
    """
    radius = cfg.coverage_radius_m
    elapsed = slot * cfg.slot_seconds
    sign = np.where(topo.offset <= radius / 2, 1.0, -1.0)
    travelled = topo.offset + sign * topo.speed * elapsed
    return radius / 2 - np.mod(travelled, radius)


def tu_mis_distance(topo: Topology, tu: int, slot: int, cfg: ScenarioConfig) -> float:
    """
    Distance between a TU and its home MIS.

    Parameters
    ----------
    topo : Topology
        The placement.
    tu : int
        TU index.
    slot : int
        Slot index, ``slot >= 0``.
    cfg : ScenarioConfig
        The scenario.

    Returns
    -------
    float
        Distance in m, never below the MIS antenna height.
    """
    x = horizontal_offset(topo, slot, cfg)[tu]
    return float(np.hypot(cfg.mis_antenna_m, x))


def link_distances(topo: Topology, slot: int, cfg: ScenarioConfig) -> np.ndarray:
    """Distances (M, K) from every TU to every MIS along the lane."""
    x = horizontal_offset(topo, slot, cfg)
    shift = (topo.home[:, None] - np.arange(topo.num_mis)[None, :]) * cfg.mis_spacing_m
    return np.hypot(cfg.mis_antenna_m, x[:, None] + shift)


def large_scale_gain(wavelength, dist, h_tx, h_rx):
    """
    Two-ray maritime attenuation coefficient.

    Parameters
    ----------
    wavelength : float
        Carrier wavelength in m.
    dist : float or ndarray
        Link distance in m.
    h_tx, h_rx : float
        Antenna heights above sea level in m.

    Returns
    -------
    float or ndarray
        ``(lambda / (4 pi d))^2 sin^2(2 pi h_tx h_rx / (lambda d))``.
    """
    dist = np.asarray(dist, dtype=float)
    if np.any(dist <= 0):
        raise make_error("D0501", {"value": float(np.min(dist))})
    if wavelength <= 0:
        raise make_error("D0502", {"value": wavelength})

    free_space = (wavelength / (4.0 * np.pi * dist)) ** 2
    gain = free_space * np.sin(2.0 * np.pi * h_tx * h_rx / (wavelength * dist)) ** 2
    return float(gain) if gain.ndim == 0 else gain


def sample_small_scale(rician_k: float, rng: np.random.Generator, size=None):
    """
    Draw the small-scale power gain ``|h|^2`` of a Rician channel.

    Parameters
    ----------
    rician_k : float
        Rician factor, ``>= 0``; ``inf`` gives the pure line-of-sight gain.
    rng : Generator
        The fading stream.
    size : int or tuple, optional
        Shape of the draw.

    Returns
    -------
    float or ndarray
        Power gains with unit mean.
    """
    shape = () if size is None else np.atleast_1d(size)
    parts = rng.standard_normal((*shape, 2))
    if np.isinf(rician_k):
        gain = np.ones(shape)
    else:
        s = (parts[..., 0] + 1j * parts[..., 1]) / np.sqrt(2.0)
        h = np.sqrt(rician_k / (1.0 + rician_k)) + np.sqrt(1.0 / (1.0 + rician_k)) * s
        gain = np.abs(h) ** 2
    return float(gain) if size is None else gain


def mis_cbs_gain(cfg: ScenarioConfig) -> float:
    return large_scale_gain(
        cfg.wavelength_cbs_m, cfg.mis_cbs_distance_m, cfg.mis_antenna_m, cfg.cbs_antenna_m
    )


def link_gains(topo: Topology, slot: int, cfg: ScenarioConfig) -> np.ndarray:
    """Large-scale gains (M, K) from every TU to every MIS."""
    return np.atleast_2d(
        large_scale_gain(
            cfg.wavelength_mis_m,
            link_distances(topo, slot, cfg),
            cfg.tu_antenna_m,
            cfg.mis_antenna_m,
        )
    )


def sample_channel(
    topo: Topology, slot: int, cfg: ScenarioConfig, streams: RandomStreams
) -> ChannelRealization:
    """Realize gains for one slot; fading is redrawn per slot and TU."""
    gains = link_gains(topo, slot, cfg)
    n = cfg.subchannels_per_mis
    fading2 = np.empty((topo.num_tus, n))
    for i in range(topo.num_tus):
        fading2[i] = sample_small_scale(
            cfg.rician_k, streams.stream(Phenomenon.FADING, i), size=n
        )
    return ChannelRealization(
        slot=slot,
        beta=np.broadcast_to(gains[:, :, None], (topo.num_tus, topo.num_mis, n)),
        fading2=fading2,
        beta_backhaul=np.full(topo.num_mis, mis_cbs_gain(cfg)),
        home=topo.home,
    )


def interference_matrix(
    decision: Decision, chan: ChannelRealization, cfg: ScenarioConfig
) -> np.ndarray:
    """
    Inter-cell interference power for every (MIS, subchannel), in W.

    In ``serving`` mode each active interferer contributes its gain towards
    its own serving MIS; in ``physical`` mode its gain towards the victim.
    """
    num_mis = chan.beta.shape[1]
    active = decision.y[:, None] * decision.z * cfg.tu_tx_power_w  # (M, N)
    if cfg.interference_mode == "serving":
        power = active * chan.beta_serving
        per_cell = np.zeros((num_mis, power.shape[1]))
        np.add.at(per_cell, chan.home, power)
        return per_cell.sum(axis=0)[None, :] - per_cell

    received = np.einsum("jn,jkn->kn", active, chan.beta)
    own = np.zeros_like(received)
    np.add.at(own, chan.home, active * chan.beta_serving)
    return received - own


def interference_power(
    decision: Decision, chan: ChannelRealization, n: int, k: int, cfg: ScenarioConfig
) -> float:
    """Interference on subchannel `n` at receiving MIS `k`, in W."""
    return float(interference_matrix(decision, chan, cfg)[k, n])


def subchannel_rates(
    chan: ChannelRealization, gamma: np.ndarray, cfg: ScenarioConfig, fading: bool = True
) -> np.ndarray:
    """
    Achievable rate of every TU on every subchannel of its home MIS.

    Parameters
    ----------
    chan : ChannelRealization
        The slot's gains.
    gamma : ndarray
        Interference (K, N) in W.
    cfg : ScenarioConfig
        The scenario.
    fading : bool, default=True
        Multiply the large-scale gain by ``|h|^2``.

    Returns
    -------
    ndarray
        Rates (M, N) in bits/s.
    """
    signal = cfg.tu_tx_power_w * chan.beta_serving
    if fading:
        signal = signal * chan.fading2
    sigma2 = noise_power(cfg, cfg.subchannel_bandwidth_hz)
    return cfg.subchannel_bandwidth_hz * np.log2(1.0 + signal / (gamma[chan.home] + sigma2))


def uplink_rate(
    y: int,
    z_row: np.ndarray,
    chan: ChannelRealization,
    gamma: np.ndarray,
    cfg: ScenarioConfig,
    *,
    tu: int,
) -> float:
    """
    Uplink rate of one TU at its home MIS.

    Parameters
    ----------
    y : int
        Offloading decision.
    z_row : ndarray
        Subchannel indicators (N,) of the TU.
    chan : ChannelRealization
        The slot's gains.
    gamma : ndarray
        Interference per subchannel (N,) at the home MIS, in W.
    cfg : ScenarioConfig
        The scenario.
    tu : int
        TU index.

    Returns
    -------
    float
        Rate in bits/s.
    """
    if not y:
        return 0.0
    sigma2 = noise_power(cfg, cfg.subchannel_bandwidth_hz)
    snr = cfg.tu_tx_power_w * chan.beta_serving[tu] * chan.fading2[tu] / (gamma + sigma2)
    return float(np.sum(np.asarray(z_row) * cfg.subchannel_bandwidth_hz * np.log2(1.0 + snr)))


def backhaul_rate(cfg: ScenarioConfig, beta_backhaul) -> float:
    """
    Rate from an MIS to the CBS over its share of the CBS spectrum.

    Parameters
    ----------
    cfg : ScenarioConfig
        The scenario.
    beta_backhaul : float or ndarray
        Attenuation towards the CBS.

    Returns
    -------
    float or ndarray
        Rate in bits/s; zero without allocated spectrum.
    """
    bandwidth = cfg.backhaul_ratio * cfg.cbs_bandwidth_hz
    if bandwidth == 0:
        return np.zeros_like(beta_backhaul, dtype=float) if np.ndim(beta_backhaul) else 0.0
    rate = bandwidth * np.log2(
        1.0 + cfg.mis_tx_power_w * np.asarray(beta_backhaul) / noise_power(cfg, bandwidth)
    )
    return float(rate) if np.ndim(rate) == 0 else rate
