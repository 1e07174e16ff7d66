"""Single-particle chain, stationary law, and the lambda(eta) curve."""

import math

import numpy as np
import pytest
from scipy.linalg import eig

from swapnet.absorption import expected_visits
from swapnet.nlmp import (
    build_chain,
    find_eta_roots,
    lambda_of_eta,
    lambda_peak,
    nu_quadratic_roots,
    rates_from_eta,
    stationary_q,
    tau_distribution,
)


def tau_closed_form(beta, gamma, k):
    """Two-sided geometric law of the sojourn displacement.

    The generating function of the sign walk stopped at an independent
    exponential is gamma / (c - beta (z + 1/z)) with c = 2 beta + gamma;
    partial fractions over the roots r, 1/r of beta z^2 - c z + beta
    give P(tau = k) = ((1-r)/(1+r)) r^|k|.
    """
    c = 2 * beta + gamma
    r = (c - math.sqrt(c * c - 4 * beta * beta)) / (2 * beta)
    return (1 - r) / (1 + r) * r ** abs(k)


def sample_tau(rng, beta, gamma, size):
    """Draw from the closed-form law by inverse transform."""
    c = 2 * beta + gamma
    r = (c - math.sqrt(c * c - 4 * beta * beta)) / (2 * beta)
    zero = rng.random(size) < (1 - r) / (1 + r)
    mag = rng.geometric(1 - r, size=size)
    sign = rng.choice((-1, 1), size=size)
    return np.where(zero, 0, sign * mag)


# ---------------------------------------------------------------------------
# tau distribution
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("beta,gamma", [(1.0, 0.5), (0.5, 0.1), (2.0, 0.9), (0.25, 0.75)])
def test_tau_matches_closed_form(beta, gamma):
    tau = tau_distribution(beta, gamma)
    for k in range(-tau.M, tau.M + 1):
        assert abs(tau.prob(k) - tau_closed_form(beta, gamma, k)) < 1e-9


def test_tau_symmetric_mean_zero_normalized():
    tau = tau_distribution(1.5, 0.3)
    assert np.array_equal(tau.probs, tau.probs[::-1])
    ks = np.arange(-tau.M, tau.M + 1)
    assert abs(float(ks @ tau.probs)) < 1e-12
    assert 1 - 1e-10 <= float(tau.probs.sum()) <= 1 + 1e-12


def test_tau_monte_carlo_oracle():
    # simulate the sign walk at an exponential time: two independent
    # Poisson counts of swap clocks, differenced
    rng = np.random.default_rng(7)
    n = 10**6
    xi = rng.exponential(1 / 0.5, n)
    w = rng.poisson(1.0 * xi) - rng.poisson(1.0 * xi)
    tau = tau_distribution(1.0, 0.5)
    for k in (0, 1, 2, 5):
        p_hat = float(np.mean(w == k))
        se = math.sqrt(p_hat * (1 - p_hat) / n)
        assert abs(tau.prob(k) - p_hat) <= 3 * se + 1e-9


def test_tau_beta_zero_point_mass():
    tau = tau_distribution(0.0, 0.4)
    assert tau.M == 0
    assert tau.prob(0) == 1.0


def test_tau_requested_truncation_padding():
    tau = tau_distribution(1.0, 0.5, M=100)
    assert tau.M == 100
    assert len(tau.probs) == 201
    assert tau.prob(100) < 1e-12


def test_tau_validation():
    with pytest.raises(ValueError, match="gamma"):
        tau_distribution(1.0, 0.0)
    with pytest.raises(ValueError, match="beta"):
        tau_distribution(-1.0, 0.5)


# ---------------------------------------------------------------------------
# chain assembly
# ---------------------------------------------------------------------------

def test_chain_rows_stochastic_and_flip_symmetric():
    chain = build_chain(tau_distribution(1.0, 0.5))
    assert np.allclose(chain.Q.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(chain.P1.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(chain.Q, chain.Q[::-1, ::-1], atol=1e-12)


def test_chain_deterministic_part():
    chain = build_chain(tau_distribution(1.0, 0.5))
    M = chain.M
    for s, target in [(2, 1), (5, 4), (1, 0), (0, 0), (-1, 0), (-2, -1), (-7, -6)]:
        assert chain.P2[s + M] == target + M


def test_chain_truncation_too_small():
    tau = tau_distribution(1.0, 0.5)
    with pytest.raises(ValueError, match="truncation"):
        build_chain(tau, M=tau.M)


def test_chain_drift_toward_origin():
    chain = build_chain(tau_distribution(1.0, 0.5), M=60)
    states = np.arange(-chain.M, chain.M + 1)
    for s in (30, 45, -30, -45):
        mean_abs_next = float(chain.Q[s + chain.M] @ np.abs(states))
        assert mean_abs_next < abs(s)


def test_chain_beta_zero_collapses():
    chain = build_chain(tau_distribution(0.0, 0.5), M=4)
    v = np.zeros(9)
    v[8] = 1.0  # state +4
    for _ in range(4):
        v = v @ chain.Q
    assert v[4] == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# stationary law
# ---------------------------------------------------------------------------

def test_stationary_matches_eigenvector():
    chain = build_chain(tau_distribution(1.0, 0.5))
    q = stationary_q(chain)
    vals, vecs = eig(chain.Q.T)
    lead = np.argmin(np.abs(vals - 1.0))
    q_eig = np.real(vecs[:, lead])
    q_eig /= q_eig.sum()
    assert np.max(np.abs(q - q_eig)) < 1e-8
    assert float(np.abs(q @ chain.Q - q).sum()) < 1e-10
    assert np.array_equal(q, q[::-1])


def test_stationary_beta_zero_point_mass():
    chain = build_chain(tau_distribution(0.0, 0.5), M=3)
    q = stationary_q(chain)
    assert q[chain.M] == 1.0
    assert q.sum() == 1.0


def test_stationary_boundary_insensitive():
    # reflection error at the walls decays fast as the window widens
    tau = tau_distribution(1.0, 0.5)

    def central_diff(base):
        qa = stationary_q(build_chain(tau, M=base))
        qb = stationary_q(build_chain(tau, M=2 * base))
        return max(abs(qa[k + base] - qb[k + 2 * base]) for k in range(-5, 6))

    assert central_diff(tau.M + 2) < 1e-6
    assert central_diff(tau.M + 20) < 1e-9


def test_stationary_matches_process_simulation():
    # independent oracle: walk the process itself, drawing displacements
    # from the closed-form law and applying the move-toward-zero step
    beta, gamma = 1.0, 0.5
    chain = build_chain(tau_distribution(beta, gamma))
    q = stationary_q(chain)
    rng = np.random.default_rng(17)
    walkers = 60_000
    pos = np.zeros(walkers, dtype=np.int64)
    for _ in range(200):
        pos = pos + sample_tau(rng, beta, gamma, walkers)
        pos = np.clip(pos, -chain.M, chain.M)
        pos = np.where(np.abs(pos) <= 1, 0, pos - np.sign(pos))
    for k in range(-3, 4):
        p_hat = float(np.mean(pos == k))
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / walkers)
        assert abs(q[k + chain.M] - p_hat) <= 4 * se


# ---------------------------------------------------------------------------
# rate profiles
# ---------------------------------------------------------------------------

def test_rates_sum_to_eta():
    prof = rates_from_eta(0.5, 1.0)
    assert prof.total_rate() == pytest.approx(0.5, abs=1e-9)
    assert prof.lam > 0
    assert all(v >= 0 for v in prof.nu.values())


def test_rates_symmetric():
    prof = rates_from_eta(0.6, 0.8)
    for k in (1, 2, 5, 10):
        assert prof.nu[k] == prof.nu[-k]
    assert 0 not in prof.nu


def test_rates_beta_zero_plain_queue():
    prof = rates_from_eta(0.35, 0.0)
    assert prof.lam == pytest.approx(0.35, abs=1e-12)
    assert all(v == 0.0 for v in prof.nu.values())


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.9])
def test_identity_q0_times_visits(beta, gamma):
    # links the stationary mass at zero to the mean services per customer
    prof = rates_from_eta(1 - gamma, beta)
    q0 = prof.lam / prof.eta
    assert q0 * expected_visits(beta, gamma) == pytest.approx(1.0, abs=1e-6)


def test_rates_validation():
    with pytest.raises(ValueError, match="eta"):
        rates_from_eta(0.0, 1.0)
    with pytest.raises(ValueError, match="eta"):
        rates_from_eta(1.0, 1.0)


# ---------------------------------------------------------------------------
# lambda(eta) curve and roots
# ---------------------------------------------------------------------------

def test_lambda_curve_endpoints_vanish():
    pts = dict(lambda_of_eta([0.001, 0.5, 0.99, 0.999], 1.0))
    assert pts[0.001] < 0.002
    assert pts[0.999] < pts[0.99] < pts[0.5]
    assert all(v > 0 for v in pts.values())


def test_lambda_curve_beta_zero_exact():
    for eta, lam in lambda_of_eta([0.1, 0.5, 0.9], 0.0):
        assert lam == eta


def test_lambda_curve_chain_route_agrees():
    for eta in (0.3, 0.5, 0.7):
        (_, lam_closed), = lambda_of_eta([eta], 1.0)
        (_, lam_chain), = lambda_of_eta([eta], 1.0, method="chain")
        assert lam_chain == pytest.approx(lam_closed, abs=1e-6)


def test_lambda_curve_continuity():
    def max_jump(n):
        grid = np.linspace(0.01, 0.99, n)
        vals = [lam for _, lam in lambda_of_eta(grid, 1.0)]
        return max(abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1))

    assert max_jump(400) < max_jump(40) < max_jump(8)


def test_lambda_grid_validation():
    with pytest.raises(ValueError, match="grid"):
        lambda_of_eta([0.5, 1.2], 1.0)


def test_lambda_peak_beta_one():
    eta_peak, lam_plus = lambda_peak(1.0)
    assert 0.55 < eta_peak < 0.65
    assert 0.24 < lam_plus < 0.25


def test_lambda_peak_decreases_with_beta():
    peaks = [lambda_peak(b)[1] for b in (0.25, 1.0, 3.0)]
    assert peaks[0] > peaks[1] > peaks[2]


def test_find_eta_roots_small_lambda():
    roots = find_eta_roots(0.001, 1.0)
    assert roots is not None
    eta_minus, eta_plus = roots
    assert eta_minus < 0.01
    assert eta_plus > 0.9
    for eta in roots:
        (_, lam), = lambda_of_eta([eta], 1.0)
        assert abs(lam - 0.001) <= 1e-8


def test_find_eta_roots_supercritical_none():
    _, lam_plus = lambda_peak(1.0)
    assert find_eta_roots(lam_plus * 1.01, 1.0) is None
    assert find_eta_roots(0.9, 1.0) is None


def test_find_eta_roots_widen_as_lambda_shrinks():
    lo1, hi1 = find_eta_roots(1e-3, 1.0)
    lo2, hi2 = find_eta_roots(1e-5, 1.0)
    assert lo2 < lo1 and hi2 > hi1
    assert hi2 > 0.999


def test_find_eta_roots_validation():
    with pytest.raises(ValueError, match="positive"):
        find_eta_roots(0.0, 1.0)


# ---------------------------------------------------------------------------
# large-beta quadratic
# ---------------------------------------------------------------------------

def test_quadratic_example_values():
    roots = nu_quadratic_roots(0.01, 1.0)
    assert roots is not None
    nu_minus, nu_plus = roots
    assert nu_minus == pytest.approx(0.00678, abs=1e-4)
    assert nu_plus == pytest.approx(0.98322, abs=1e-4)


def test_quadratic_root_contract():
    for lam, beta in [(0.01, 1.0), (0.002, 10.0), (0.05, 2.0)]:
        roots = nu_quadratic_roots(lam, beta)
        if roots is None:
            continue
        for nu in roots:
            assert abs(3 * nu * nu - 3 * nu * (1 - lam) + 2 * lam * beta) < 1e-12
        assert 0 < roots[0] <= roots[1] < 1 - lam


def test_quadratic_negative_discriminant():
    assert nu_quadratic_roots(0.5, 1.0) is None
    assert nu_quadratic_roots(0.1, 5.0) is None
