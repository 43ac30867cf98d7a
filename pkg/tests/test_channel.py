import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from spacebatch import errors, scenarios
from spacebatch.channel import (
    batch_rate_prob, erlang_cdf, error_law, error_law_table, feasible_rate_probs,
    rate_distribution, sample_snr, snr_cdf,
)
from spacebatch.config import db_to_linear

TH_LIN = [db_to_linear(t) for t in (10.0, 15.0, 20.0, math.inf)]


def test_exponential_special_case():
    # m = M leaves one degree of freedom; at the per-stream mean the CDF is 1 - 1/e
    assert snr_cdf(800.0, 8, 8, 100.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert snr_cdf(800.0, 8, 8, 0.0) == 0.0
    assert snr_cdf(800.0, 8, 8, math.inf) == 1.0


@pytest.mark.parametrize("shape, scale, x", [(1, 2.0, 3.0), (4, 10.0, 25.0), (8, 0.5, 4.0), (8, 30, 1e4)])
def test_erlang_cdf_matches_scipy(shape, scale, x):
    assert erlang_cdf(x, shape, scale) == pytest.approx(
        stats.gamma.cdf(x, shape, scale=scale), abs=1e-12)


def test_snr_cdf_rejects_bad_batch_size():
    with pytest.raises(errors.BadBatchSize):
        snr_cdf(10.0, 9, 8, 1.0)
    with pytest.raises(errors.BadBatchSize):
        snr_cdf(10.0, 0, 8, 1.0)


def test_top_rate_probability_example():
    theta = feasible_rate_probs(100.0 * 8, 8, 8, TH_LIN)
    assert theta[3] == pytest.approx(math.exp(-1), abs=1e-12)
    assert theta.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_interval_always_feasible():
    assert feasible_rate_probs(3.0, 1, 8, [math.inf]).tolist() == [1.0]


def test_min_rate_over_batch():
    theta = np.array([0.2, 0.3, 0.5])
    assert np.allclose(batch_rate_prob(theta[None, :]), theta)
    assert np.allclose(batch_rate_prob(np.array([[0.5, 0.5], [0.5, 0.5]])), [0.75, 0.25])
    det = np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(batch_rate_prob(det), [0.0, 1.0, 0.0])


def brute_min_rate(theta_rows):
    # joint enumeration of every node's rate
    R = theta_rows.shape[1]
    phi = np.zeros(R)
    for combo in itertools.product(range(R), repeat=theta_rows.shape[0]):
        phi[min(combo)] += np.prod([theta_rows[k, c] for k, c in enumerate(combo)])
    return phi


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), min_size=1, max_size=4))
def test_min_rate_matches_joint_enumeration(rows):
    theta = np.array(rows)
    theta /= theta.sum(axis=1, keepdims=True)
    assert np.allclose(batch_rate_prob(theta), brute_min_rate(theta), atol=1e-12)


def test_two_node_rate_distribution_example():
    # two identical nodes each using r_1 or r_2 with probability 1/2
    g = math.log(2.0)  # exponential SNR with unit mean exceeds the threshold w.p. 1/2
    cfg = scenarios.baseline(2, 4, 2, 1.0, rates=(6e6, 12e6),
                             snr_thresholds=(10 * math.log10(g), math.inf),
                             node_mean_snr=10 * math.log10(2.0), n_antennas=2)
    phi = rate_distribution(cfg).row(2)
    assert phi == pytest.approx([0.75, 0.25], abs=1e-12)


@pytest.mark.parametrize("s_max", [4, 6, 8])
def test_heterogeneous_groups_rows_normalised(s_max):
    cfg = scenarios.het_snr(s_max, 60.0)
    phi = rate_distribution(cfg).phi
    assert np.allclose(phi.sum(axis=1), 1.0, atol=1e-9)


def test_class_grouping_equals_subset_enumeration():
    cfg = scenarios.het_snr(8, 60.0)
    assert np.allclose(rate_distribution(cfg, "classes").phi,
                       rate_distribution(cfg, "subsets").phi, atol=1e-12)


def test_subset_limit():
    with pytest.raises(errors.SubsetExplosion):
        rate_distribution(scenarios.het_snr(8, 60.0), "subsets", limit=1000)


def test_homogeneous_equals_any_subset():
    cfg = scenarios.baseline(6, 20, 4, 40.0, node_mean_snr=22.0)
    from spacebatch.channel import node_theta
    for m in range(1, 5):
        theta = node_theta(cfg, m)
        assert np.allclose(rate_distribution(cfg).row(m), batch_rate_prob(theta[:m]), atol=1e-12)


def test_bigger_batches_use_slower_rates():
    # less power and fewer degrees of freedom per stream: the expected rate index drops with m
    cfg = scenarios.baseline(8, 20, 8, 40.0, node_mean_snr=25.0)
    phi = rate_distribution(cfg).phi
    mean_index = phi @ np.arange(phi.shape[1])
    assert np.all(np.diff(mean_index) < 0)


def test_ideal_channel_uses_top_rate():
    phi = rate_distribution(scenarios.baseline(8, 20, 8, 40.0, ideal_channel=True)).phi
    assert np.all(phi[:, -1] == 1.0)


def test_infinite_snr_equals_ideal_flag():
    a = rate_distribution(scenarios.baseline(8, 20, 8, 40.0)).phi
    b = rate_distribution(scenarios.baseline(8, 20, 8, 40.0, node_mean_snr=30.0, ideal_channel=True)).phi
    assert np.array_equal(a, b)


def test_error_law_examples():
    assert error_law(0.0, 3).tolist() == [1.0, 0.0, 0.0, 0.0]
    assert error_law(0.1, 2)[1] == pytest.approx(0.18, abs=1e-15)
    assert error_law(1.0, 3).tolist() == [0.0, 0.0, 0.0, 1.0]
    with pytest.raises(errors.InvalidParameter):
        error_law(1.2, 2)


@given(st.floats(0, 1), st.integers(1, 8))
def test_error_law_matches_enumeration(p, m):
    brute = np.zeros(m + 1)
    for flags in itertools.product((0, 1), repeat=m):
        y = sum(flags)
        brute[y] += p**y * (1 - p) ** (m - y)
    row = error_law(p, m)
    assert np.allclose(row, brute, atol=1e-12)
    assert row.sum() == pytest.approx(1.0, abs=1e-12)
    assert row[0] == pytest.approx((1 - p) ** m, abs=1e-15)


def test_error_table_ignores_pe_when_ideal():
    cfg = scenarios.baseline(4, 10, 4, 1.0, packet_error_prob=0.3, ideal_channel=True)
    assert np.all(error_law_table(cfg).psi[:, 0] == 1.0)


def test_sampler_is_deterministic():
    a = sample_snr(50.0, 3, 8, np.random.default_rng(7), size=1000)
    b = sample_snr(50.0, 3, 8, np.random.default_rng(7), size=1000)
    assert np.array_equal(a, b)
    assert isinstance(sample_snr(50.0, 3, 8, np.random.default_rng(7)), float)


@pytest.mark.parametrize("m", [1, 4, 8])
def test_sampler_moments_small(m):
    draws = sample_snr(100.0, m, 8, np.random.default_rng(m), size=200_000)
    assert draws.mean() == pytest.approx((8 - m + 1) * 100.0 / m, rel=0.01)
