"""Frame durations and Poisson arrival counts during a frame."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .config import ValidatedConfig


def control_duration(config: ValidatedConfig, m: int) -> float:
    """Preamble, training, CSI feedback and ACKs, all sent at the lowest rate."""
    fl = config.frame_lengths
    bits = fl.l_sb + config.n_antennas * fl.l_tr + m * fl.l_csi + m * fl.l_ack
    return bits / config.rates[0]


def frame_duration(config: ValidatedConfig, m: int, rate: float) -> float:
    return control_duration(config, m) + config.frame_lengths.l_d / rate


def frame_duration_table(config: ValidatedConfig) -> np.ndarray:
    """``table[m - 1, l]`` = duration of an ``m``-packet frame at rate index ``l``."""
    return np.array([[frame_duration(config, m, r) for r in config.rates]
                     for m in range(1, config.s_max + 1)])


def arrivals_in_frame_pmf(lam: float, t: float, v: int) -> float:
    """Poisson probability of exactly ``v`` arrivals in ``t`` seconds at rate ``lam``."""
    mu = lam * t
    if mu == 0.0:
        return 1.0 if v == 0 else 0.0
    return math.exp(v * math.log(mu) - mu - math.lgamma(v + 1))


def poisson_pmf_vector(mu: float, vmax: int) -> np.ndarray:
    """Poisson pmf at ``0..vmax`` evaluated in log space."""
    v = np.arange(vmax + 1)
    if mu == 0.0:
        out = np.zeros(vmax + 1)
        out[0] = 1.0
        return out
    return np.exp(v * math.log(mu) - mu - gammaln(v + 1))
