"""Estimators against closed forms and enumerable oracles."""

import numpy as np
import pytest
from scipy.linalg import expm

from swapnet.estimators import (
    default_spacing,
    estimate_drift,
    exit_probability_estimate,
    jump_target_uniformity,
    permutation_mixing,
)
from swapnet.simulate import SimConfig
from swapnet.topology import build_cycle, build_general, petersen


def cycle_cfg(K, lam, beta=1.0, seed=0):
    return SimConfig(topology=build_cycle(K), lambda_offsets={0: lam}, beta=beta,
                     seed=seed, max_events=1)


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------

def test_default_spacing():
    assert default_spacing(cycle_cfg(11, 0.5, beta=1.0)) == 550
    assert default_spacing(cycle_cfg(5, 0.5, beta=2.0)) == 500
    assert default_spacing(cycle_cfg(5, 0.5, beta=0.5)) == 250


def test_drift_supercritical_cycle_matches_transit_identity():
    # all-busy drift per server is lambda + p - 1 with p = (K-3)/K
    est = estimate_drift(cycle_cfg(11, 0.5, seed=70), block_count=300)
    target = 0.5 + 8.0 / 11.0 - 1.0
    assert est.blocks_used == 300
    assert est.rate == pytest.approx(target, abs=est.half_width + 0.01)
    assert est.half_width < 0.02


def test_drift_subcritical_cycle_is_negative():
    est = estimate_drift(cycle_cfg(5, 0.1, seed=71), block_count=20)
    assert est.rate < -0.5
    assert est.rate == pytest.approx(0.1 + 2.0 / 5.0 - 1.0, abs=0.1)


def test_drift_no_arrivals_pure_service():
    # on a diameter-1 graph every service exits: drift is the service rate
    est = estimate_drift(cycle_cfg(3, 0.0, seed=72), block_count=10)
    assert est.rate == pytest.approx(-1.0, abs=0.1)


def test_drift_no_arrivals_with_recirculation():
    # transits feed customers back: net drift is p - 1, not -1
    est = estimate_drift(cycle_cfg(5, 0.0, seed=74), block_count=15)
    assert est.rate == pytest.approx(2.0 / 5.0 - 1.0, abs=0.1)


def test_drift_insufficient_when_queues_drain():
    with pytest.raises(RuntimeError, match="insufficient"):
        estimate_drift(cycle_cfg(5, 0.1, seed=73), block_count=100)


def test_drift_parameter_validation():
    with pytest.raises(ValueError, match="spacing"):
        estimate_drift(cycle_cfg(5, 0.5), spacing=0)
    with pytest.raises(ValueError, match="blocks"):
        estimate_drift(cycle_cfg(5, 0.5), block_count=1)


# ---------------------------------------------------------------------------
# mixing
# ---------------------------------------------------------------------------

def test_mixing_at_time_zero_is_exact():
    est = permutation_mixing(cycle_cfg(7, 0.5), 0.0, 1000)
    assert est.tv == pytest.approx(1.0 - 1.0 / 7.0)
    assert est.counts[0] == 1000


def test_mixing_decays_toward_uniform():
    early = permutation_mixing(cycle_cfg(7, 0.5, seed=80), 1.0, 50_000)
    late = permutation_mixing(cycle_cfg(7, 0.5, seed=81), 25.0, 50_000)
    assert early.tv > 0.2
    assert late.tv < 0.02


def test_mixing_matches_exact_walk_marginal_on_cycle():
    # tagged server moves across each incident edge at rate beta
    K, beta, t = 5, 1.0, 0.8
    A = np.zeros((K, K))
    for v in range(K):
        A[v, (v + 1) % K] += beta
        A[v, (v - 1) % K] += beta
    np.fill_diagonal(A, -A.sum(axis=1))
    exact = expm(A * t)[0]
    est = permutation_mixing(cycle_cfg(5, 0.5, beta=beta, seed=82), t, 50_000)
    emp = est.counts / est.trials
    assert 0.5 * np.abs(emp - exact).sum() < 0.02


def test_mixing_matches_exact_walk_marginal_on_path():
    # unequal degrees exercise the lazy uniformization step
    G = build_general({0: [1], 1: [0, 2], 2: [1, 3], 3: [2]})
    beta, t = 1.0, 0.7
    A = np.zeros((4, 4))
    for v in range(4):
        for w in G.neighbor_idx[v]:
            A[v, w] += beta
    np.fill_diagonal(A, -A.sum(axis=1))
    exact = expm(A * t)[0]
    config = SimConfig(topology=G, lambda_offsets={0: 0.0}, beta=beta, seed=83, max_events=1)
    est = permutation_mixing(config, t, 50_000)
    assert 0.5 * np.abs(est.counts / est.trials - exact).sum() < 0.02


def test_mixing_mean_field_per_edge_slows_down():
    # per-edge normalization divides the tagged walk rate by N
    fast = permutation_mixing(cycle_cfg(7, 0.5, seed=84), 2.0, 30_000)
    slow_cfg = SimConfig(topology=build_cycle(7), lambda_offsets={0: 0.5}, beta=1.0,
                         seed=84, max_events=1, replica_count=4,
                         swap_normalization="per_edge")
    slow = permutation_mixing(slow_cfg, 2.0, 30_000)
    assert slow.tv > fast.tv


def test_mixing_validation():
    with pytest.raises(ValueError, match="100"):
        permutation_mixing(cycle_cfg(5, 0.5), 1.0, 50)
    with pytest.raises(ValueError, match="nonnegative"):
        permutation_mixing(cycle_cfg(5, 0.5), -1.0, 1000)


# ---------------------------------------------------------------------------
# exit probability of deep customers
# ---------------------------------------------------------------------------

def test_exit_probability_nine_cycle():
    est = exit_probability_estimate(cycle_cfg(9, 0.5, seed=90), 50, 25_000)
    assert est.observations >= 25_000
    assert est.probability == pytest.approx(3.0 / 9.0, abs=est.ci_half_width + 0.005)


def test_exit_probability_petersen():
    config = SimConfig(topology=petersen(), lambda_offsets={0: 0.5}, beta=1.0,
                       seed=91, max_events=1)
    est = exit_probability_estimate(config, 50, 40_000)
    assert est.probability == pytest.approx(4.0 / 10.0, abs=est.ci_half_width + 0.005)


def test_exit_probability_insufficient_in_stable_regime():
    with pytest.raises(RuntimeError, match="insufficient"):
        exit_probability_estimate(cycle_cfg(5, 0.1, seed=92), 50, 20_000)


def test_exit_probability_validation():
    with pytest.raises(ValueError, match="position_threshold"):
        exit_probability_estimate(cycle_cfg(5, 0.5), 0, 100)
    with pytest.raises(ValueError, match="trials"):
        exit_probability_estimate(cycle_cfg(5, 0.5), 10, 0)


# ---------------------------------------------------------------------------
# jump-target uniformity
# ---------------------------------------------------------------------------

def test_jump_targets_uniform_on_seven_cycle():
    est = jump_target_uniformity(cycle_cfg(7, 0.5, seed=93), 6000)
    assert est.transits >= 6000
    assert est.counts.sum() == est.transits
    assert est.counts.shape == (6,)
    assert est.p_value > 0.01


def test_jump_targets_impossible_on_triangle():
    # diameter 1: every service exits, transits cannot occur
    est = jump_target_uniformity(cycle_cfg(3, 0.5), 100)
    assert est.transits == 0
    assert est.chi2 is None and est.p_value is None


def test_jump_targets_insufficient_in_stable_regime():
    with pytest.raises(RuntimeError, match="insufficient"):
        jump_target_uniformity(cycle_cfg(7, 0.1, seed=94), 50_000)


def test_jump_targets_requires_plain_network():
    config = SimConfig(topology=build_cycle(7), lambda_offsets={0: 0.5}, beta=1.0,
                       seed=0, max_events=1, replica_count=2)
    with pytest.raises(ValueError, match="replica_count"):
        jump_target_uniformity(config, 100)
