"""Event-driven simulation of the shared-buffer multi-antenna access point.

The loop alternates between two event kinds, Poisson arrivals and frame
ends. A frame end purges the successfully received packets; the next
space-batch is built right away if packets remain, otherwise on the next
arrival. When both events fall on the same instant the departure is handled
first.

Random draws come from a single ``numpy.random.Generator`` in this order:

* per arrival: one standard exponential (next inter-arrival gap), then one
  uniform (destination, by inverse CDF over the traffic weights);
* per batch, unless the channel is ideal: ``M - m + 1`` standard
  exponentials per selected packet, in queue order (Erlang SNR);
* per batch: one uniform per selected packet, in queue order (error flag).

The first inter-arrival gap is drawn before the loop starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from . import errors
from .chain import Metrics
from .channel import erlang_draw
from .config import ValidatedConfig, db_to_linear
from .timing import frame_duration_table

DEFAULT_WARMUP_FRACTION = 0.05


@numba.njit(cache=True)
def select_batch(dest, qlen, s_max, seen, out):
    """Scan the queue head-first, taking the first packet of each destination.

    Writes queue positions to ``out`` and returns the batch size. ``seen``
    must be all-False on entry and is restored before returning.
    """
    m = 0
    for pos in range(qlen):
        d = dest[pos]
        if not seen[d]:
            seen[d] = True
            out[m] = pos
            m += 1
            if m == s_max:
                break
    for k in range(m):
        seen[dest[out[k]]] = False
    return m


@numba.njit(cache=True)
def _rate_index(snr, ub):
    # first rate whose upper SNR bound covers snr; the last bound is +inf
    for l in range(ub.shape[0]):
        if snr <= ub[l]:
            return l
    return ub.shape[0] - 1


@numba.njit(cache=True)
def _run(rng, n_nodes, K, s_max, n_antennas, lam, p_e, cum_weights, mean_snr,
         ub, durations, ideal, duration, warmup, trace_cap):
    dest = np.zeros(K, np.int64)
    arr_time = np.zeros(K)
    seen = np.zeros(n_nodes, np.bool_)
    batch = np.zeros(s_max, np.int64)
    failed = np.zeros(s_max, np.bool_)
    keep = np.zeros(K, np.bool_)

    batch_hist = np.zeros(s_max + 1, np.int64)
    dep_hist = np.zeros(K + 1, np.int64)
    occ_time = np.zeros(K + 1)
    joint = np.zeros((K + 1, s_max + 1), np.int64)
    rate_hist = np.zeros(ub.shape[0], np.int64)
    tr_dest = np.zeros(trace_cap, np.int64)
    tr_arr = np.zeros(trace_cap)
    tr_dep = np.zeros(trace_cap)
    n_trace = 0

    arrivals = 0
    blocked = 0
    delivered = 0
    sum_delay = 0.0
    departures = 0
    q_at_warmup = -1

    R = ub.shape[0]
    total_w = cum_weights[n_nodes - 1]
    qlen = 0
    t = 0.0
    m = 0
    sched_state = 0
    frame_end = np.inf
    next_arrival = rng.standard_exponential() / lam if lam > 0 else np.inf

    while True:
        departure = frame_end <= next_arrival
        t_new = frame_end if departure else next_arrival
        if t_new > duration:
            break
        if t_new >= warmup and q_at_warmup < 0:
            q_at_warmup = qlen
        lo = t if t > warmup else warmup
        if t_new > lo:
            occ_time[qlen] += t_new - lo
        t = t_new
        counted = t >= warmup

        if departure:
            n_keep = 0
            for k in range(qlen):
                keep[k] = True
            for k in range(m):
                if failed[k]:
                    continue
                pos = batch[k]
                keep[pos] = False
                if counted:
                    delivered += 1
                    sum_delay += t - arr_time[pos]
                    if n_trace < trace_cap:
                        tr_dest[n_trace] = dest[pos]
                        tr_arr[n_trace] = arr_time[pos]
                        tr_dep[n_trace] = t
                        n_trace += 1
            for k in range(qlen):
                if keep[k]:
                    dest[n_keep] = dest[k]
                    arr_time[n_keep] = arr_time[k]
                    n_keep += 1
            qlen = n_keep
            if counted:
                departures += 1
                dep_hist[qlen] += 1
            frame_end = np.inf
            sched_state = qlen
        else:
            if counted:
                arrivals += 1
            u = rng.random() * total_w
            d = 0
            while d < n_nodes - 1 and cum_weights[d] <= u:
                d += 1
            if qlen == K:
                if counted:
                    blocked += 1
            else:
                dest[qlen] = d
                arr_time[qlen] = t
                qlen += 1
            next_arrival = t + rng.standard_exponential() / lam
            if frame_end < np.inf:
                continue
            # idle server: the new packet starts a batch on its own
            sched_state = 0

        if qlen == 0:
            continue
        # schedule the next space-batch
        m = select_batch(dest, qlen, s_max, seen, batch)
        if ideal:
            l = R - 1
        else:
            l = R - 1
            for k in range(m):
                snr = erlang_draw(rng, n_antennas - m + 1, mean_snr[dest[batch[k]]] / m)
                lk = _rate_index(snr, ub)
                if lk < l:
                    l = lk
        for k in range(m):
            failed[k] = rng.random() < p_e
        frame_end = t + durations[m - 1, l]
        if counted:
            batch_hist[m] += 1
            joint[sched_state, m] += 1
            rate_hist[l] += 1

    if duration > t:
        lo = t if t > warmup else warmup
        if duration > lo:
            occ_time[qlen] += duration - lo
    if q_at_warmup < 0:
        q_at_warmup = qlen
    counters = np.array([arrivals, blocked, delivered, departures, q_at_warmup, qlen, n_trace],
                        np.int64)
    return (counters, sum_delay, batch_hist, dep_hist, occ_time, joint, rate_hist,
            tr_dest[:n_trace], tr_arr[:n_trace], tr_dep[:n_trace])


@dataclass(frozen=True)
class SimStats:
    arrivals: int
    blocked: int
    delivered: int
    departures: int
    sum_delay: float
    time_weighted_queue: float
    batch_size_histogram: np.ndarray  # index m
    departure_state_histogram: np.ndarray  # index q
    occupancy_time_histogram: np.ndarray  # seconds spent at each occupancy
    batch_by_state: np.ndarray  # [q, m]: batches of size m scheduled from departure state q
    rate_histogram: np.ndarray
    sim_time: float  # observed window length
    queue_at_start: int
    queue_at_end: int
    trace: dict = field(default_factory=dict, compare=False, repr=False)

    def __eq__(self, other):
        if not isinstance(other, SimStats):
            return NotImplemented
        scalars = ("arrivals", "blocked", "delivered", "departures", "sum_delay",
                   "time_weighted_queue", "sim_time", "queue_at_start", "queue_at_end")
        arrays = ("batch_size_histogram", "departure_state_histogram",
                  "occupancy_time_histogram", "batch_by_state", "rate_histogram")
        return (all(getattr(self, s) == getattr(other, s) for s in scalars)
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays))

    __hash__ = None

    @property
    def mean_batch(self) -> float:
        h = self.batch_size_histogram
        return float(np.arange(h.size) @ h / h.sum())

    def conserved(self) -> bool:
        return self.arrivals == (self.blocked + self.delivered
                                 + self.queue_at_end - self.queue_at_start)


def build_space_batch(destinations, s_max: int) -> list[int]:
    """Queue positions forming the next space-batch (per-node FIFO)."""
    dest = np.asarray(destinations, dtype=np.int64)
    if dest.size == 0:
        raise errors.EmptyQueue("cannot build a space-batch from an empty queue")
    seen = np.zeros(int(dest.max()) + 1, np.bool_)
    out = np.zeros(s_max, np.int64)
    m = select_batch(dest, dest.size, s_max, seen, out)
    return [int(p) for p in out[:m]]


def simulate(config: ValidatedConfig, seed: int, duration: float,
             warmup: float | None = None, trace: int = 0) -> SimStats:
    """Run one replication.

    ``warmup`` defaults to 5% of ``duration``; statistics cover
    ``[warmup, duration]``. ``trace`` keeps the first ``trace`` deliveries
    (destination, arrival and delivery time) for inspection.
    """
    if warmup is None:
        warmup = DEFAULT_WARMUP_FRACTION * duration
    if not (duration > 0 and 0 <= warmup < duration):
        raise errors.InvalidDuration(f"need duration > warmup >= 0, got {duration}, {warmup}")
    rng = np.random.default_rng(seed)
    weights = np.asarray(config.traffic_weights, dtype=float)
    p_e = 0.0 if config.ideal_channel else config.packet_error_prob
    ub = np.array([db_to_linear(g) for g in config.snr_thresholds])
    ub[-1] = np.inf
    out = _run(
        rng, config.n_nodes, config.buffer_size, config.s_max, config.n_antennas,
        float(config.aggregate_rate), float(p_e), np.cumsum(weights),
        np.array([db_to_linear(s) for s in config.node_mean_snr]), ub,
        frame_duration_table(config), bool(config.ideal_channel),
        float(duration), float(warmup), int(trace),
    )
    counters, sum_delay, batch_hist, dep_hist, occ, joint, rate_hist, tr_d, tr_a, tr_t = out
    arrivals, blocked, delivered, departures, q0, q1, _ = (int(c) for c in counters)
    return SimStats(
        arrivals=arrivals,
        blocked=blocked,
        delivered=delivered,
        departures=departures,
        sum_delay=float(sum_delay),
        time_weighted_queue=float(np.arange(occ.size) @ occ),
        batch_size_histogram=batch_hist,
        departure_state_histogram=dep_hist,
        occupancy_time_histogram=occ,
        batch_by_state=joint,
        rate_histogram=rate_hist,
        sim_time=float(duration - warmup),
        queue_at_start=q0,
        queue_at_end=q1,
        trace={"destination": tr_d, "arrival": tr_a, "delivery": tr_t} if trace else {},
    )


def measured_metrics(stats: SimStats, config: ValidatedConfig) -> Metrics:
    if stats.delivered == 0:
        raise errors.NoDeliveries("no packet was delivered in the observed window")
    return Metrics(
        blocking_prob=stats.blocked / stats.arrivals if stats.arrivals else 0.0,
        throughput=stats.delivered * config.frame_lengths.l_d / stats.sim_time,
        mean_queue=stats.time_weighted_queue / stats.sim_time,
        mean_delay=stats.sum_delay / stats.delivered,
        mean_batch=stats.mean_batch,
    )
