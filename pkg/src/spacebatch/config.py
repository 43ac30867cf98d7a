"""Scenario description shared by the analytic solver and the simulator.

A :class:`SystemConfig` is a plain frozen record. :func:`validate` checks it
and returns a :class:`ValidatedConfig`, which is what every downstream
function expects.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import errors


@dataclass(frozen=True)
class FrameLengths:
    """Frame field lengths in bits."""

    l_sb: float = 256.0
    l_tr: float = 64.0
    l_csi: float = 64.0
    l_d: float = 8000.0
    l_ack: float = 64.0


@dataclass(frozen=True)
class SystemConfig:
    n_nodes: int
    n_antennas: int
    buffer_size: int
    s_max: int
    aggregate_rate: float  # packets per second
    packet_error_prob: float = 0.0
    frame_lengths: FrameLengths = field(default_factory=FrameLengths)
    rates: tuple[float, ...] = (6e6, 12e6, 18e6, 24e6)
    snr_thresholds: tuple[float, ...] = (10.0, 15.0, 20.0, math.inf)
    node_mean_snr: tuple[float, ...] = ()
    traffic_weights: tuple[float, ...] = ()
    # Forces the top rate for every batch and zero packet errors.
    ideal_channel: bool = False

    def __post_init__(self):
        # Accept any sequence for the tuple fields so callers can pass lists.
        for name in ("rates", "snr_thresholds", "node_mean_snr", "traffic_weights"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(float(v) for v in value))
        if isinstance(self.frame_lengths, dict):
            object.__setattr__(self, "frame_lengths", FrameLengths(**self.frame_lengths))

    @property
    def load_bps(self) -> float:
        """Offered load in bits per second."""
        return self.aggregate_rate * self.frame_lengths.l_d

    def replace(self, **changes) -> "SystemConfig":
        """Copy with changes; the result is always unvalidated."""
        values = {f.name: getattr(self, f.name) for f in dataclasses.fields(SystemConfig)}
        values.update(changes)
        return SystemConfig(**values)


class ValidatedConfig(SystemConfig):
    """A :class:`SystemConfig` whose invariants have been checked."""


def _finite_nonneg(name: str, value: float) -> None:
    if not (math.isfinite(value) and value >= 0):
        raise errors.InvalidParameter(f"{name} must be finite and >= 0, got {value!r}")


def _positive_int(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise errors.InvalidParameter(f"{name} must be a positive integer, got {value!r}")


def validate(config: SystemConfig) -> ValidatedConfig:
    """Check every scenario invariant and return a :class:`ValidatedConfig`.

    Raises a distinct :mod:`spacebatch.errors` subclass per violated rule.
    """
    if isinstance(config, ValidatedConfig):
        return config

    for name in ("n_nodes", "n_antennas", "buffer_size", "s_max"):
        _positive_int(name, getattr(config, name))
    if config.s_max > config.n_antennas:
        raise errors.SMaxExceedsAntennas(
            f"s_max={config.s_max} exceeds n_antennas={config.n_antennas}")
    if config.buffer_size < 2 * config.s_max:
        raise errors.BufferTooSmall(
            f"buffer_size={config.buffer_size} < 2*s_max={2 * config.s_max}")

    _finite_nonneg("aggregate_rate", config.aggregate_rate)
    p_e = config.packet_error_prob
    if not (0.0 <= p_e <= 1.0):
        raise errors.InvalidParameter(f"packet_error_prob must lie in [0, 1], got {p_e!r}")
    for f in dataclasses.fields(FrameLengths):
        _finite_nonneg(f.name, getattr(config.frame_lengths, f.name))
    if config.frame_lengths.l_d <= 0:
        raise errors.InvalidParameter("l_d must be > 0")

    rates = config.rates
    if not rates:
        raise errors.RatesNotAscending("at least one rate is required")
    if any(not (math.isfinite(r) and r > 0) for r in rates):
        raise errors.InvalidParameter(f"rates must be finite and > 0, got {rates!r}")
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise errors.RatesNotAscending(f"rates must be strictly ascending, got {rates!r}")

    thresholds = config.snr_thresholds
    if len(thresholds) != len(rates):
        raise errors.ThresholdMismatch(
            f"{len(thresholds)} SNR thresholds for {len(rates)} rates")
    if any(math.isnan(t) or t == -math.inf for t in thresholds):
        raise errors.ThresholdMismatch(f"invalid SNR thresholds {thresholds!r}")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise errors.ThresholdMismatch(f"SNR thresholds must be ascending, got {thresholds!r}")

    if len(config.node_mean_snr) != config.n_nodes:
        raise errors.InvalidParameter(
            f"node_mean_snr has {len(config.node_mean_snr)} entries, expected {config.n_nodes}")
    if any(math.isnan(s) or s == -math.inf for s in config.node_mean_snr):
        raise errors.InvalidParameter("node_mean_snr entries must be numbers or +inf")

    weights = config.traffic_weights
    if len(weights) != config.n_nodes:
        raise errors.BadTrafficWeights(
            f"traffic_weights has {len(weights)} entries, expected {config.n_nodes}")
    for w in weights:
        _finite_nonneg("traffic weight", w)
    if sum(weights) <= 0:
        raise errors.BadTrafficWeights("traffic weights must have a positive sum")

    values = {f.name: getattr(config, f.name) for f in dataclasses.fields(SystemConfig)}
    return ValidatedConfig(**values)


def db_to_linear(x: float) -> float:
    """Convert decibels to a linear power ratio; ``+inf`` maps to ``+inf``."""
    if x == math.inf:
        return math.inf
    return 10.0 ** (x / 10.0)


def is_homogeneous_traffic(config: SystemConfig) -> bool:
    return uniform(config.traffic_weights)


def with_ideal_channel(config: SystemConfig) -> ValidatedConfig:
    return validate(config.replace(ideal_channel=True, packet_error_prob=0.0))


# --- JSON --------------------------------------------------------------------

def _parse_number(value: Any) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        raise errors.InvalidParameter(f"cannot parse number {value!r}")
    return float(value)


def _encode_number(value: float) -> Any:
    return "inf" if value == math.inf else value


def _per_node(value: Any, n: int, default: float | None) -> tuple[float, ...]:
    if value is None:
        if default is None:
            raise errors.InvalidParameter("node_mean_snr is required")
        return (default,) * n
    if isinstance(value, (list, tuple)):
        return tuple(_parse_number(v) for v in value)
    return (_parse_number(value),) * n


def config_from_dict(doc: dict) -> SystemConfig:
    """Build a config from a JSON-style mapping.

    ``node_mean_snr`` and ``traffic_weights`` may be given as a single number
    applied to every node; weights default to uniform.
    """
    doc = dict(doc)
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(doc) - known
    if unknown:
        raise errors.InvalidParameter(f"unknown config keys: {sorted(unknown)}")
    try:
        n = int(doc["n_nodes"])
    except KeyError as exc:
        raise errors.InvalidParameter("n_nodes is required") from exc

    kwargs: dict[str, Any] = {
        "n_nodes": n,
        "n_antennas": int(doc.get("n_antennas", 8)),
        "buffer_size": int(doc["buffer_size"]),
        "s_max": int(doc["s_max"]),
        "aggregate_rate": _parse_number(doc["aggregate_rate"]),
        "packet_error_prob": _parse_number(doc.get("packet_error_prob", 0.0)),
        "frame_lengths": FrameLengths(**{k: _parse_number(v)
                                         for k, v in doc.get("frame_lengths", {}).items()}),
        "node_mean_snr": _per_node(doc.get("node_mean_snr"), n, None),
        "traffic_weights": _per_node(doc.get("traffic_weights"), n, 1.0),
        "ideal_channel": bool(doc.get("ideal_channel", False)),
    }
    if "rates" in doc:
        kwargs["rates"] = tuple(_parse_number(r) for r in doc["rates"])
    if "snr_thresholds" in doc:
        kwargs["snr_thresholds"] = tuple(_parse_number(t) for t in doc["snr_thresholds"])
    return SystemConfig(**kwargs)


def config_to_dict(config: SystemConfig) -> dict:
    return {
        "n_nodes": config.n_nodes,
        "n_antennas": config.n_antennas,
        "buffer_size": config.buffer_size,
        "s_max": config.s_max,
        "aggregate_rate": config.aggregate_rate,
        "packet_error_prob": config.packet_error_prob,
        "frame_lengths": dataclasses.asdict(config.frame_lengths),
        "rates": list(config.rates),
        "snr_thresholds": [_encode_number(t) for t in config.snr_thresholds],
        "node_mean_snr": [_encode_number(s) for s in config.node_mean_snr],
        "traffic_weights": list(config.traffic_weights),
        "ideal_channel": config.ideal_channel,
    }


def load_config(path: str | Path) -> ValidatedConfig:
    with open(path, encoding="utf-8") as fh:
        return validate(config_from_dict(json.load(fh)))


def dump_config(config: SystemConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")


def uniform(values: Sequence[float]) -> bool:
    return all(v == values[0] for v in values)
