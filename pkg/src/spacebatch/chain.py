"""Embedded Markov chain of the post-departure queue occupancy.

States are the occupancy ``i = 0..K`` right after a departure. From state
``i`` a batch of ``m`` packets is sent at rate ``r``; ``y`` of them fail and
stay queued, and ``V`` Poisson arrivals join during the frame (truncated by
the buffer). The occupancy at the next departure is
``min(i_eff - m + y + V, K - m + y)``, where ``i_eff = max(i, 1)``: from an
empty queue the next batch is the single packet whose arrival ends the idle
period, and only arrivals during its frame count towards ``V``.

Arbitrary-time occupancies follow from the departure distribution by
renewal-reward over inter-departure epochs, using that Poisson arrivals see
time averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from . import errors
from .channel import ErrorLaw, RateDistribution, error_law_table, rate_distribution
from .combinatorics import BatchSizeDistribution, batch_size_distribution
from .config import ValidatedConfig, is_homogeneous_traffic
from .timing import frame_duration, frame_duration_table, poisson_pmf_vector

RESIDUAL_TOL = 1e-10
POWER_TOL = 1e-12
POWER_MAX_ITER = 10**6


@dataclass(frozen=True)
class AnalyticModel:
    """Everything the chain needs, precomputed once per config."""

    config: ValidatedConfig
    batch: BatchSizeDistribution
    rates: RateDistribution
    errors: ErrorLaw
    durations: np.ndarray  # [m - 1, l]


@dataclass(frozen=True)
class ChainSolution:
    P: np.ndarray
    pi_d: np.ndarray
    pi_s: np.ndarray
    expected_epoch: float
    epoch_by_state: np.ndarray
    service_by_state: np.ndarray
    residual: float


@dataclass(frozen=True)
class Metrics:
    blocking_prob: float
    throughput: float  # bits/s
    mean_queue: float  # packets
    mean_delay: float  # seconds
    mean_batch: float  # packets

    def as_dict(self) -> dict[str, float]:
        return {
            "p_b": self.blocking_prob,
            "throughput": self.throughput,
            "mean_queue": self.mean_queue,
            "mean_delay": self.mean_delay,
            "mean_batch": self.mean_batch,
        }


def build_model(config: ValidatedConfig, rate_method: str = "classes") -> AnalyticModel:
    return AnalyticModel(
        config=config,
        batch=batch_size_distribution(config),
        rates=rate_distribution(config, method=rate_method),
        errors=error_law_table(config),
        durations=frame_duration_table(config),
    )


def poisson_tail(mu: float, c: int) -> float:
    """``Pr{V >= c}`` for ``V ~ Poisson(mu)``, accurate deep in the tail."""
    if c <= 0:
        return 1.0
    if mu == 0.0:
        return 0.0
    return float(gammainc(c, mu))


def expected_overflow(mu: float, c: int) -> float:
    """``E[(V - c)^+]``: arrivals in excess of ``c`` free places."""
    if c <= 0:
        return mu
    return max(0.0, mu * poisson_tail(mu, c) - c * poisson_tail(mu, c + 1))


def _truncated_arrivals(mu: float, cap: int) -> np.ndarray:
    """Arrivals during a frame, lumping ``>= cap`` into the last entry."""
    out = poisson_pmf_vector(mu, cap)
    out[cap] = poisson_tail(mu, cap)
    return out


def _check_state(config: ValidatedConfig, i: int, j: int, m: int, y: int) -> None:
    K = config.buffer_size
    if not (0 <= i <= K and 0 <= j <= K):
        raise errors.BadState(f"state pair ({i}, {j}) outside [0, {K}]")
    s_i = max(1, min(i, config.s_max))
    if not 1 <= m <= s_i:
        raise errors.BadState(f"batch size {m} not schedulable from state {i}")
    if not 0 <= y <= m:
        raise errors.BadState(f"{y} erroneous packets in a batch of {m}")


def conditional_transition(i: int, j: int, m: int, y: int, rate: float,
                           config: ValidatedConfig) -> float:
    """Transition probability ``i -> j`` given batch size, failures and rate."""
    _check_state(config, i, j, m, y)
    K = config.buffer_size
    i_eff = max(i, 1)
    base = i_eff - m + y
    top = K - m + y
    if j < base or j > top:
        return 0.0
    mu = config.aggregate_rate * frame_duration(config, m, rate)
    return float(_truncated_arrivals(mu, K - i_eff)[j - base])


def _state_blocks(model: AnalyticModel):
    """Yield ``(i, m, weight, mix)`` for every state and schedulable batch size.

    ``mix`` is the rate-averaged truncated arrival distribution; the
    conditional row for ``y`` failures is ``mix`` placed at offset
    ``i_eff - m + y``.
    """
    cfg = model.config
    K = cfg.buffer_size
    lam = cfg.aggregate_rate
    R = len(cfg.rates)
    cache: dict[tuple[int, int], np.ndarray] = {}
    for i in range(K + 1):
        i_eff = max(i, 1)
        cap = K - i_eff
        for m in range(1, model.batch.max_size(i) + 1):
            p_m = model.batch.table[i, m - 1]
            if p_m == 0.0:
                continue
            key = (m, cap)
            mix = cache.get(key)
            if mix is None:
                mix = np.zeros(cap + 1)
                for l in range(R):
                    phi = model.rates.phi[m - 1, l]
                    if phi:
                        mix += phi * _truncated_arrivals(lam * model.durations[m - 1, l], cap)
                cache[key] = mix
            yield i, m, p_m, mix


def build_transition_matrix(model: AnalyticModel) -> np.ndarray:
    K = model.config.buffer_size
    P = np.zeros((K + 1, K + 1))
    for i, m, p_m, mix in _state_blocks(model):
        i_eff = max(i, 1)
        psi = model.errors.row(m)
        for y in range(m + 1):
            if psi[y] == 0.0:
                continue
            base = i_eff - m + y
            P[i, base: base + mix.size] += p_m * psi[y] * mix
    return P


def _power_iteration(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(POWER_MAX_ITER):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < POWER_TOL:
            return nxt
        pi = nxt
    raise errors.NotConverged(f"power iteration did not converge in {POWER_MAX_ITER} steps")


def _gth(P: np.ndarray) -> np.ndarray | None:
    """Grassmann-Taksar-Heyman state reduction.

    Subtraction-free, so tiny stationary probabilities keep their relative
    accuracy. Returns ``None`` when some state cannot reach a lower one.
    """
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            return None
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for j in range(1, n):
        x[j] = x[:j] @ A[:j, j]
    return x / x.sum()


def _dense_solve(P: np.ndarray) -> np.ndarray | None:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
        pi += np.linalg.solve(A, b - A @ pi)
    except np.linalg.LinAlgError:
        return None
    return pi


def solve_departure_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary row vector of ``P``.

    Direct solvers first (state reduction, then LU with the normalisation
    replacing one balance equation); power iteration only if both fail the
    residual check.
    """
    for solver in (_gth, _dense_solve):
        pi = solver(P)
        if pi is None or not np.all(np.isfinite(pi)):
            continue
        pi = np.where(pi < 0.0, 0.0, pi)
        pi /= pi.sum()
        if np.max(np.abs(pi @ P - pi)) <= RESIDUAL_TOL:
            return pi
    pi = _power_iteration(P)
    return pi / pi.sum()


def epoch_durations(model: AnalyticModel, pi_d: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Mean epoch length per departure state, its average, and mean service time per state.

    Returns ``(E[W(i)], E[W], E[T_d(i)])``.
    """
    lam = model.config.aggregate_rate
    if lam <= 0.0:
        raise errors.LambdaZero("idle periods are unbounded when the arrival rate is zero")
    mean_frame = (model.rates.phi * model.durations).sum(axis=1)  # per m
    service = model.batch.table @ mean_frame
    idle = np.zeros_like(service)
    idle[0] = 1.0 / lam
    epoch = idle + service
    return epoch, float(pi_d @ epoch), service


def observation_matrix(model: AnalyticModel) -> np.ndarray:
    """``H[i, k]``: expected number of arrivals in departure state ``i`` that find ``k < K`` packets.

    For a batch ``(m, y)`` leaving the queue at ``j``, the occupancy just
    before the departure is ``j + m - y``, so an arrival finding ``k`` exists
    iff ``j >= k + 1 - m + y``; the caller restricts to ``i <= k``.
    """
    K = model.config.buffer_size
    H = np.zeros((K + 1, K))
    ks = np.arange(K)
    for i, m, p_m, mix in _state_blocks(model):
        i_eff = max(i, 1)
        psi = model.errors.row(m)
        for y in range(m + 1):
            if psi[y] == 0.0:
                continue
            base = i_eff - m + y
            row = np.zeros(K + 2)
            row[base: base + mix.size] = mix
            tail = np.cumsum(row[::-1])[::-1]  # tail[t] = sum_{j >= t} row[j]
            idx = np.clip(ks + 1 - m + y, 0, K + 1)
            H[i] += p_m * psi[y] * tail[idx]
    return H


def blocked_arrivals(model: AnalyticModel) -> np.ndarray:
    """Expected number of arrivals blocked during an epoch, per departure state.

    Only arrivals in excess of the ``K - i_eff`` free places are lost, whatever
    the batch size or number of failures.
    """
    cfg = model.config
    K = cfg.buffer_size
    lam = cfg.aggregate_rate
    out = np.zeros(K + 1)
    for i in range(K + 1):
        cap = K - max(i, 1)
        for m in range(1, model.batch.max_size(i) + 1):
            p_m = model.batch.table[i, m - 1]
            if p_m == 0.0:
                continue
            for l, phi in enumerate(model.rates.phi[m - 1]):
                if phi:
                    out[i] += p_m * phi * expected_overflow(lam * model.durations[m - 1, l], cap)
    return out


def steady_state_distribution(model: AnalyticModel, pi_d: np.ndarray,
                              expected_epoch: float) -> np.ndarray:
    """Occupancy seen by an arbitrary arrival, hence at an arbitrary time.

    States below ``K`` count the arrivals that find ``k`` packets; the full
    state is the complement. The complement is also evaluated directly from
    the expected overflow so that very small blocking probabilities keep
    their relative precision; both must agree.
    """
    K = model.config.buffer_size
    lam = model.config.aggregate_rate
    H = observation_matrix(model)
    i_idx = np.arange(K + 1)[:, None]
    k_idx = np.arange(K)[None, :]
    mask = i_idx <= k_idx
    pi_s = np.empty(K + 1)
    pi_s[:K] = (pi_d[:, None] * H * mask).sum(axis=0) / (lam * expected_epoch)
    closure = 1.0 - pi_s[:K].sum()
    direct = float(pi_d @ blocked_arrivals(model)) / (lam * expected_epoch)
    if np.any(pi_s[:K] < -1e-9) or closure < -1e-9:
        raise errors.NegativeMass(f"negative occupancy mass {min(pi_s[:K].min(), closure):.3e}")
    if abs(closure - direct) > 1e-9:
        raise errors.NegativeMass(
            f"blocking mass mismatch: closure {closure:.6e} vs direct {direct:.6e}")
    pi_s[K] = direct
    return np.where(pi_s < 0.0, 0.0, pi_s)


def compute_metrics(config: ValidatedConfig, pi_d: np.ndarray, pi_s: np.ndarray,
                    batch: BatchSizeDistribution) -> Metrics:
    lam = config.aggregate_rate
    K = config.buffer_size
    p_b = float(pi_s[K])
    accepted = lam * (1.0 - p_b)
    if accepted <= 0.0:
        raise errors.MetricsUndefined("accepted arrival rate is zero")
    mean_queue = float(np.arange(K + 1) @ pi_s)
    return Metrics(
        blocking_prob=p_b,
        throughput=accepted * config.frame_lengths.l_d,
        mean_queue=mean_queue,
        mean_delay=mean_queue / accepted,
        # offset form keeps E[s] exactly 1 when every batch is a single packet
        mean_batch=1.0 + float(pi_d @ (batch.mean_size() - 1.0)),
    )


@dataclass(frozen=True)
class AnalyticResult:
    model: AnalyticModel
    chain: ChainSolution
    metrics: Metrics


def solve_chain(model: AnalyticModel) -> ChainSolution:
    P = build_transition_matrix(model)
    pi_d = solve_departure_distribution(P)
    epoch, mean_epoch, service = epoch_durations(model, pi_d)
    pi_s = steady_state_distribution(model, pi_d, mean_epoch)
    residual = float(np.max(np.abs(pi_d @ P - pi_d)))
    return ChainSolution(P, pi_d, pi_s, mean_epoch, epoch, service, residual)


def solve(config: ValidatedConfig, rate_method: str = "classes") -> AnalyticResult:
    """Analytic metrics for a homogeneous-traffic scenario."""
    if not is_homogeneous_traffic(config):
        raise errors.HeterogeneousTrafficUnsupported(
            "the analytic model assumes uniformly distributed destinations")
    model = build_model(config, rate_method)
    chain = solve_chain(model)
    return AnalyticResult(model, chain, compute_metrics(config, chain.pi_d, chain.pi_s, model.batch))
