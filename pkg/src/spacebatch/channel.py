"""Per-stream SNR law under zero-forcing, rate selection and packet errors.

With ``M`` antennas and ``m`` parallel streams, the SNR seen by node ``n``
is Erlang with shape ``M - m + 1`` and scale ``mean_snr[n] / m`` (power is
split evenly across streams). The batch is sent at the smallest rate any
selected node can support.

Rate ``i`` serves SNRs in ``(ub[i-1], ub[i]]`` where ``ub`` are the configured
thresholds in linear scale, the first interval starts at 0 and the last
upper bound is treated as ``+inf``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from . import errors
from .config import ValidatedConfig, db_to_linear

SUBSET_LIMIT = 10**7


def erlang_cdf(gamma: float, shape: int, scale: float) -> float:
    """``1 - sum_{k<shape} x^k/k! e^-x`` with ``x = gamma/scale``."""
    if gamma <= 0:
        return 0.0
    if gamma == math.inf:
        return 1.0
    if scale == math.inf:
        return 0.0
    x = gamma / scale
    term = math.exp(-x)
    tail = 0.0
    for k in range(shape):
        if k:
            term *= x / k
        tail += term
    return max(0.0, 1.0 - tail)


def snr_cdf(mean_snr: float, m: int, n_antennas: int, gamma: float) -> float:
    """CDF of the per-stream SNR for a node of linear mean SNR ``mean_snr``."""
    if not 1 <= m <= n_antennas:
        raise errors.BadBatchSize(f"batch size {m} outside [1, {n_antennas}]")
    return erlang_cdf(gamma, n_antennas - m + 1, mean_snr / m)


def upper_bounds(thresholds_linear: Sequence[float]) -> np.ndarray:
    ub = np.asarray(thresholds_linear, dtype=float).copy()
    ub[-1] = np.inf
    return ub


def feasible_rate_probs(mean_snr: float, m: int, n_antennas: int,
                        thresholds_linear: Sequence[float]) -> np.ndarray:
    """Probability that each rate is the highest one the node supports."""
    ub = upper_bounds(thresholds_linear)
    cdf = np.array([snr_cdf(mean_snr, m, n_antennas, g) for g in ub])
    theta = np.diff(np.concatenate(([0.0], cdf)))
    return np.clip(theta, 0.0, 1.0)


def _tails(theta: np.ndarray) -> np.ndarray:
    """``tails[..., i] = sum_{j >= i} theta[..., j]`` with a trailing zero column."""
    rev = np.cumsum(theta[..., ::-1], axis=-1)[..., ::-1]
    pad = np.zeros(theta.shape[:-1] + (1,))
    return np.concatenate((rev, pad), axis=-1)


def batch_rate_prob(theta_rows: np.ndarray) -> np.ndarray:
    """Distribution of the minimum rate over a batch.

    ``theta_rows`` has one row of feasible-rate probabilities per selected
    node (all computed for the same batch size). Returns ``phi`` over rates.
    """
    tails = _tails(np.atleast_2d(theta_rows))
    prod = np.prod(tails, axis=0)
    return prod[:-1] - prod[1:]


@dataclass(frozen=True)
class RateDistribution:
    """``phi[m - 1, l]``: probability that a batch of size ``m`` uses rate ``l``."""

    phi: np.ndarray

    def row(self, m: int) -> np.ndarray:
        return self.phi[m - 1]


@dataclass(frozen=True)
class ErrorLaw:
    """``psi[m - 1, y]``: probability that ``y`` of ``m`` packets are erroneous."""

    p_e: float
    psi: np.ndarray

    def row(self, m: int) -> np.ndarray:
        return self.psi[m - 1, : m + 1]


def node_theta(config: ValidatedConfig, m: int) -> np.ndarray:
    """Feasible-rate probabilities for every node, shape ``(N, R)``."""
    thresholds = [db_to_linear(t) for t in config.snr_thresholds]
    return np.array([
        feasible_rate_probs(db_to_linear(s), m, config.n_antennas, thresholds)
        for s in config.node_mean_snr
    ])


def _phi_by_subsets(theta: np.ndarray, m: int, limit: int) -> np.ndarray:
    n = theta.shape[0]
    n_subsets = math.comb(n, m)
    if n_subsets > limit:
        raise errors.SubsetExplosion(f"C({n}, {m}) = {n_subsets} subsets exceeds limit {limit}")
    tails = _tails(theta)
    acc = np.zeros(theta.shape[1])
    combos = itertools.combinations(range(n), m)
    chunk = 65536
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        prod = np.prod(tails[block], axis=1)  # (chunk, R + 1)
        acc += (prod[:, :-1] - prod[:, 1:]).sum(axis=0)
    return acc / n_subsets


def _phi_by_classes(theta: np.ndarray, m: int) -> np.ndarray:
    """Same average as subset enumeration, grouping nodes with identical rows."""
    n = theta.shape[0]
    keys = [tuple(row) for row in theta]
    classes = Counter(keys)
    class_tails = [(_tails(np.array(k)), size) for k, size in classes.items()]
    acc = np.zeros(theta.shape[1])

    def walk(idx: int, left: int, weight: int, prod: np.ndarray):
        nonlocal acc
        if idx == len(class_tails):
            if left == 0:
                acc += weight * (prod[:-1] - prod[1:])
            return
        tails, size = class_tails[idx]
        for c in range(min(size, left) + 1):
            walk(idx + 1, left - c, weight * math.comb(size, c), prod * tails**c)

    walk(0, m, 1, np.ones(theta.shape[1] + 1))
    return acc / math.comb(n, m)


def rate_distribution(config: ValidatedConfig, method: str = "classes",
                      limit: int = SUBSET_LIMIT) -> RateDistribution:
    """Rate distribution per batch size, averaged over all equally likely batches.

    ``method="subsets"`` enumerates every node subset explicitly (and raises
    :class:`SubsetExplosion` past ``limit``); ``"classes"`` enumerates class
    counts of nodes with identical SNR, which is exact and much cheaper.
    """
    R = len(config.rates)
    phi = np.zeros((config.s_max, R))
    if config.ideal_channel:
        phi[:, -1] = 1.0
        return RateDistribution(phi)
    for m in range(1, config.s_max + 1):
        theta = node_theta(config, m)
        if method == "subsets":
            phi[m - 1] = _phi_by_subsets(theta, m, limit)
        elif method == "classes":
            phi[m - 1] = _phi_by_classes(theta, m)
        else:
            raise ValueError(f"unknown method {method!r}")
    return RateDistribution(np.clip(phi, 0.0, 1.0))


def error_law(p_e: float, m: int) -> np.ndarray:
    """Binomial pmf of the number of erroneous packets in a batch of ``m``."""
    if not 0.0 <= p_e <= 1.0:
        raise errors.InvalidParameter(f"p_e must lie in [0, 1], got {p_e}")
    return np.array([math.comb(m, y) * p_e**y * (1.0 - p_e) ** (m - y) for y in range(m + 1)])


def error_law_table(config: ValidatedConfig) -> ErrorLaw:
    p_e = 0.0 if config.ideal_channel else config.packet_error_prob
    psi = np.zeros((config.s_max, config.s_max + 1))
    for m in range(1, config.s_max + 1):
        psi[m - 1, : m + 1] = error_law(p_e, m)
    return ErrorLaw(p_e, psi)


# --- sampling ----------------------------------------------------------------

@numba.njit(cache=True)
def erlang_draw(rng, shape, scale):
    """Sum of ``shape`` independent exponentials of mean ``scale``."""
    total = 0.0
    for _ in range(shape):
        total += rng.standard_exponential()
    return total * scale


@numba.njit(cache=True)
def _erlang_many(rng, shape, scale, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = erlang_draw(rng, shape, scale)
    return out


def sample_snr(mean_snr: float, m: int, n_antennas: int, rng: np.random.Generator,
               size: int | None = None):
    """Draw per-stream SNR values (linear) for a node with linear mean ``mean_snr``."""
    if not 1 <= m <= n_antennas:
        raise errors.BadBatchSize(f"batch size {m} outside [1, {n_antennas}]")
    draws = _erlang_many(rng, n_antennas - m + 1, mean_snr / m, 1 if size is None else size)
    return float(draws[0]) if size is None else draws
