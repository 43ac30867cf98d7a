import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from spacebatch import errors, scenarios, simulator
from spacebatch.chain import (
    _dense_solve, _gth, build_model, build_transition_matrix, compute_metrics,
    conditional_transition, epoch_durations, solve, solve_departure_distribution,
)
from spacebatch.combinatorics import batch_size_distribution
from spacebatch.timing import frame_duration


def md1k_chain(lam, T, K):
    """Departure-epoch chain of a single deterministic server with room for K packets."""
    a = stats.poisson(lam * T)
    P = np.zeros((K + 1, K + 1))
    for i in range(K + 1):
        start = max(i, 1) - 1
        for j in range(start, K - 1):
            P[i, j] = a.pmf(j - start)
        P[i, K - 1] = a.sf(K - 2 - start)
    return P


def test_conditional_transition_examples(single_server):
    cfg = single_server
    T = frame_duration(cfg, 1, 24e6)
    assert conditional_transition(0, 0, 1, 0, 24e6, cfg) == pytest.approx(
        math.exp(-cfg.aggregate_rate * T), rel=1e-12)
    for i in (0, 1, 7, 25):
        row = sum(conditional_transition(i, j, 1, 0, 24e6, cfg) for j in range(26))
        assert row == pytest.approx(1.0, abs=1e-12)
    assert conditional_transition(5, 3, 1, 0, 24e6, cfg) == 0.0
    assert conditional_transition(5, 25, 1, 0, 24e6, cfg) == 0.0  # above K - m + y


def test_vanishing_load_stays_put():
    cfg = scenarios.baseline(4, 10, 2, 1e-9)
    assert conditional_transition(6, 4, 2, 0, 24e6, cfg) == pytest.approx(1.0, abs=1e-9)
    assert conditional_transition(6, 5, 2, 1, 24e6, cfg) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("args", [(-1, 0, 1, 0), (0, 26, 1, 0), (3, 3, 2, 0), (1, 1, 1, 2)])
def test_conditional_transition_bad_state(single_server, args):
    with pytest.raises(errors.BadState):
        conditional_transition(*args, 24e6, single_server)


def test_matches_independent_md1k(single_server):
    cfg = single_server
    P = build_transition_matrix(build_model(cfg))
    ref = md1k_chain(cfg.aggregate_rate, frame_duration(cfg, 1, 24e6), cfg.buffer_size)
    assert np.allclose(P, ref, atol=1e-13)


@pytest.mark.parametrize("load", [5.0, 15.0, 20.0, 40.0])
def test_blocking_matches_classical_finite_queue(load):
    # classical M/G/1/K identity: P_b = 1 - 1 / (pi_0 + rho) on the departure chain
    cfg = scenarios.baseline(1, 25, 1, load, rates=(24e6,), snr_thresholds=(math.inf,))
    T = frame_duration(cfg, 1, 24e6)
    P = md1k_chain(cfg.aggregate_rate, T, cfg.buffer_size)[:-1, :-1]
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(abs(w - 1))])
    pi /= pi.sum()
    rho = cfg.aggregate_rate * T
    expected = 1.0 - 1.0 / (pi[0] + rho)
    assert solve(cfg).metrics.blocking_prob == pytest.approx(expected, rel=1e-8, abs=1e-13)


def test_baseline_rows_stochastic(baseline_n16):
    P = build_transition_matrix(build_model(baseline_n16))
    assert P.shape == (51, 51)
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-9
    assert P.min() >= 0 and P.max() <= 1


def test_all_packets_fail_means_no_progress():
    cfg = scenarios.baseline(4, 12, 3, 30.0, node_mean_snr=25.0, packet_error_prob=1.0)
    P = build_transition_matrix(build_model(cfg))
    assert np.all(np.tril(P, -1) == 0.0)


def test_trivial_solves():
    assert solve_departure_distribution(np.eye(1)).tolist() == [1.0]
    pi = solve_departure_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert pi == pytest.approx([0.5, 0.5], abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_gth_agrees_with_lu(n, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((n, n)) + 1e-3
    P /= P.sum(axis=1, keepdims=True)
    a, b = _gth(P), _dense_solve(P)
    assert np.allclose(a, b, atol=1e-12)
    assert np.abs(a @ P - a).max() <= 1e-12


def test_solution_invariants(baseline_n16):
    res = solve(baseline_n16)
    c, lam = res.chain, baseline_n16.aggregate_rate
    assert c.residual <= 1e-10
    assert c.pi_d.sum() == pytest.approx(1, abs=1e-9)
    assert c.pi_s.sum() == pytest.approx(1, abs=1e-9)
    assert c.pi_s.min() >= 0
    assert c.pi_s[0] == pytest.approx(c.pi_d[0] / (lam * c.expected_epoch), abs=1e-9)
    assert np.allclose(c.epoch_by_state[1:], c.service_by_state[1:])
    assert c.epoch_by_state[0] == pytest.approx(1 / lam + c.service_by_state[0])


def test_single_rate_service_time(single_server):
    model = build_model(single_server)
    pi = solve_departure_distribution(build_transition_matrix(model))
    _, _, service = epoch_durations(model, pi)
    assert np.allclose(service, frame_duration(single_server, 1, 24e6))


def test_zero_arrival_rate():
    cfg = scenarios.baseline(2, 6, 2, 0.0)
    model = build_model(cfg)
    with pytest.raises(errors.LambdaZero):
        epoch_durations(model, np.eye(7)[0])


def test_light_load_empty_system():
    idle = [solve(scenarios.baseline(8, 25, 8, x, node_mean_snr=20.0)).chain.pi_s[0]
            for x in (1.0, 1e-2, 1e-4, 1e-6)]
    assert np.all(np.diff(idle) > 0)
    assert idle[-1] > 1 - 1e-7


def test_single_node_batches_exactly_one():
    assert solve(scenarios.baseline(1, 30, 1, 10.0)).metrics.mean_batch == 1.0


def test_metric_definitions():
    cfg = scenarios.baseline(1, 2, 1, 8.0)
    batch = batch_size_distribution(cfg)
    m = compute_metrics(cfg, np.array([0.6, 0.3, 0.1]), np.array([0.5, 0.3, 0.2]), batch)
    assert m.blocking_prob == pytest.approx(0.2)
    assert m.mean_queue == pytest.approx(0.7)
    assert m.mean_batch == 1.0
    m0 = compute_metrics(cfg, np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), batch)
    assert m0.throughput == pytest.approx(cfg.aggregate_rate * 8000)
    with pytest.raises(errors.MetricsUndefined):
        compute_metrics(cfg, np.array([0, 0, 1.0]), np.array([0, 0, 1.0]), batch)


@pytest.mark.parametrize("cfg", [
    scenarios.baseline(16, 50, 6, 90.0, node_mean_snr=scenarios.HET_SNR_DB, packet_error_prob=0.1),
    scenarios.baseline(8, 25, 8, 100.0, ideal_channel=True),
    scenarios.baseline(1, 30, 1, 10.0),
])
def test_metric_identities(cfg):
    m = solve(cfg).metrics
    lam = cfg.aggregate_rate
    assert 0 <= m.blocking_prob <= 1
    assert m.throughput == pytest.approx(lam * (1 - m.blocking_prob) * 8000, rel=1e-12)
    assert m.mean_delay * lam * (1 - m.blocking_prob) == pytest.approx(m.mean_queue, rel=1e-12)
    assert 1 <= m.mean_batch <= cfg.s_max


@pytest.mark.parametrize("n, k", [(4, 25), (16, 50), (32, 100)])
def test_blocking_nondecreasing_in_load(n, k):
    loads = np.arange(20, 141, 10.0)
    pb = [solve(scenarios.baseline(n, k, 8, x, ideal_channel=True)).metrics.blocking_prob for x in loads]
    assert np.all(np.diff(pb) >= 0)


def test_heterogeneous_traffic_rejected():
    cfg = scenarios.baseline(16, 50, 8, 60.0, traffic_weights=scenarios.traffic_profile("tp1"))
    with pytest.raises(errors.HeterogeneousTrafficUnsupported):
        solve(cfg)


def test_rate_methods_agree():
    cfg = scenarios.het_snr(6, 70.0)
    a, b = solve(cfg).metrics, solve(cfg, rate_method="subsets").metrics
    assert a.blocking_prob == pytest.approx(b.blocking_prob, rel=1e-9)


# --- simulation as oracle -----------------------------------------------------

def sim_replicas(cfg, seeds, duration):
    return [simulator.simulate(cfg, s, duration) for s in seeds]


def mean_se(values):
    v = np.asarray(values, dtype=float)
    return v.mean(axis=0), v.std(axis=0, ddof=1) / math.sqrt(len(v))


@pytest.mark.slow
def test_departure_distribution_vs_long_simulation():
    # K=4 toy system; ten replicas give about 10^7 departures in total
    cfg = scenarios.baseline(1, 4, 1, 4.0, rates=(6e6,), snr_thresholds=(math.inf,))
    res = solve(cfg)
    runs = sim_replicas(cfg, range(10), 2250.0)
    assert sum(r.departures for r in runs) >= 10**7 * 0.99
    hist, se = mean_se([r.departure_state_histogram / r.departures for r in runs])
    assert np.all(np.abs(hist - res.chain.pi_d) <= 3 * se + 1e-12)
    gap, gap_se = mean_se([r.sim_time / r.departures for r in runs])
    assert res.chain.expected_epoch == pytest.approx(gap, rel=0.01)


SMALL = {
    "n1_k4_one_rate": scenarios.baseline(1, 4, 1, 5.0, rates=(6e6,), snr_thresholds=(math.inf,)),
    "n2_k4_two_rates": scenarios.baseline(2, 4, 2, 10.0, rates=(6e6, 12e6),
                                          snr_thresholds=(12.0, math.inf), node_mean_snr=15.0),
    "n3_k6_one_rate": scenarios.baseline(3, 6, 3, 8.0, rates=(6e6,), snr_thresholds=(math.inf,)),
}


@pytest.mark.slow
@pytest.mark.parametrize("name", SMALL)
def test_small_configs_match_simulation(name):
    cfg = SMALL[name]
    m = solve(cfg).metrics
    runs = [simulator.measured_metrics(s, cfg) for s in sim_replicas(cfg, range(10), 1000.0)]
    for key in ("blocking_prob", "mean_queue", "mean_batch"):
        mean, se = mean_se([getattr(r, key) for r in runs])
        assert abs(getattr(m, key) - mean) <= 3 * se + 1e-12, (key, getattr(m, key), mean, se)


@pytest.mark.slow
def test_occupancy_matches_time_average():
    cfg = scenarios.baseline(16, 25, 8, 80.0, ideal_channel=True)
    res = solve(cfg)
    runs = sim_replicas(cfg, range(10), 1000.0)
    occ, _ = mean_se([r.occupancy_time_histogram / r.sim_time for r in runs])
    assert np.abs(occ - res.chain.pi_s).max() <= 0.01
    pb, _ = mean_se([r.blocked / r.arrivals for r in runs])
    assert abs(pb - res.metrics.blocking_prob) <= 0.02
