"""Reference scenarios: the evaluation parameter set and its traffic profiles."""

from __future__ import annotations

import math

import numpy as np

from .config import FrameLengths, SystemConfig, ValidatedConfig, validate

BASELINE_FRAME = FrameLengths(l_sb=256, l_tr=64, l_csi=64, l_d=8000, l_ack=64)
BASELINE_RATES = (6e6, 12e6, 18e6, 24e6)
BASELINE_THRESHOLDS_DB = (10.0, 15.0, 20.0, math.inf)
BASELINE_ANTENNAS = 8

# 5 nodes at 25 dB, 5 at 45 dB, 6 at 35 dB
HET_SNR_DB = (25.0,) * 5 + (45.0,) * 5 + (35.0,) * 6


def baseline(n_nodes: int, buffer_size: int, s_max: int, load_mbps: float, *,
             node_mean_snr=math.inf, packet_error_prob: float = 0.0,
             traffic_weights=None, ideal_channel: bool = False,
             rates=BASELINE_RATES, snr_thresholds=BASELINE_THRESHOLDS_DB,
             n_antennas: int = BASELINE_ANTENNAS) -> ValidatedConfig:
    """Evaluation parameter set with the offered load given in Mbit/s."""
    if np.isscalar(node_mean_snr):
        node_mean_snr = (float(node_mean_snr),) * n_nodes
    if traffic_weights is None:
        traffic_weights = (1.0,) * n_nodes
    return validate(SystemConfig(
        n_nodes=n_nodes,
        n_antennas=n_antennas,
        buffer_size=buffer_size,
        s_max=s_max,
        aggregate_rate=load_mbps * 1e6 / BASELINE_FRAME.l_d,
        packet_error_prob=packet_error_prob,
        frame_lengths=BASELINE_FRAME,
        rates=rates,
        snr_thresholds=snr_thresholds,
        node_mean_snr=node_mean_snr,
        traffic_weights=traffic_weights,
        ideal_channel=ideal_channel,
    ))


def het_snr(s_max: int, load_mbps: float, *, packet_error_prob: float = 0.0,
            buffer_size: int = 50) -> ValidatedConfig:
    """Sixteen nodes in three mean-SNR groups."""
    return baseline(16, buffer_size, s_max, load_mbps, node_mean_snr=HET_SNR_DB,
                  packet_error_prob=packet_error_prob)


def traffic_profile(name: str, rng: np.random.Generator | None = None) -> tuple[float, ...]:
    """Per-node traffic weights for the 16-node heterogeneous-traffic profiles."""
    name = name.lower()
    heavy = {"hom": 1.0, "tp1": 4.0, "tp2": 8.0, "tp3": 16.0}
    if name in heavy:
        return (heavy[name],) * 4 + (1.0,) * 12
    if name == "tp4":
        if rng is None:
            raise ValueError("TP4 draws random weights and needs a generator")
        return tuple(float(a) for a in rng.uniform(0.0, 16.0, size=16))
    raise ValueError(f"unknown traffic profile {name!r}")
