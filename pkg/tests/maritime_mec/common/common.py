import numpy as np
from maritime_mec._config import ScenarioConfig
from maritime_mec._model import (
    ChannelRealization,
    EnergyCost,
    NetworkState,
    SlotOutcome,
)
from maritime_mec.channel import noise_power


def small_config(**changes):
    values = dict(num_mis=1, tus_per_mis=(1,), subchannels_per_mis=1)
    values.update(changes)
    return ScenarioConfig(**values)


def make_state(q_tu, q_mis=None, *, home=None, z_virtual=None, battery=None, slot=0):
    q_tu = np.asarray(q_tu)
    q_mis = np.zeros_like(q_tu) if q_mis is None else np.asarray(q_mis)
    home = np.zeros(len(q_tu), dtype=np.int64) if home is None else np.asarray(home)
    num_mis = int(home.max()) + 1 if len(home) else 1
    if z_virtual is not None:
        num_mis = max(num_mis, len(np.atleast_1d(z_virtual)))
    return NetworkState(
        slot=slot,
        q_tu=q_tu,
        q_mis=q_mis,
        z_virtual=np.zeros(num_mis) if z_virtual is None else np.atleast_1d(z_virtual),
        battery=np.zeros(num_mis) if battery is None else np.atleast_1d(battery),
        home=home,
    )


def gain_for_snr(snr, cfg, bandwidth=None, power=None):
    """Large-scale gain that gives `snr` without interference."""
    bandwidth = cfg.subchannel_bandwidth_hz if bandwidth is None else bandwidth
    power = cfg.tu_tx_power_w if power is None else power
    return snr * noise_power(cfg, bandwidth) / power


def make_chan(serving, home, num_mis, *, fading2=None, beta_backhaul=None, slot=0):
    """
    Channel where every TU only has gain towards its home MIS.

    `serving` is the (M, N) serving gain.
    """
    serving = np.asarray(serving, dtype=float)
    home = np.asarray(home, dtype=np.int64)
    num_tus, n = serving.shape
    beta = np.zeros((num_tus, num_mis, n))
    beta[np.arange(num_tus), home, :] = serving
    return ChannelRealization(
        slot=slot,
        beta=beta,
        fading2=np.ones((num_tus, n)) if fading2 is None else np.asarray(fading2),
        beta_backhaul=(
            np.full(num_mis, 1e-10) if beta_backhaul is None else np.asarray(beta_backhaul)
        ),
        home=home,
    )


def make_outcome(theta, mu, m, arrivals, *, num_mis=1):
    theta = np.asarray(theta)
    zeros = np.zeros(num_mis)
    return SlotOutcome(
        rates=np.zeros(len(theta)),
        theta=theta,
        mu=np.asarray(mu),
        m=np.asarray(m),
        arrivals=np.asarray(arrivals),
        harvest=zeros,
        cost=EnergyCost(c_bas=zeros, c_tra=zeros, c_com=zeros),
    )
