"""Link-layer performance of multi-antenna access points sending space-batches.

Analytic embedded-Markov-chain solver plus a discrete-event simulator of the
same system.
"""

from .chain import Metrics, solve
from .config import SystemConfig, ValidatedConfig, db_to_linear, load_config, validate
from .simulator import SimStats, measured_metrics, simulate

__all__ = [
    "Metrics",
    "SimStats",
    "SystemConfig",
    "ValidatedConfig",
    "db_to_linear",
    "load_config",
    "measured_metrics",
    "simulate",
    "solve",
    "validate",
]
