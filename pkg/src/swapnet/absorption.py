"""Absorption times of a tagged customer's distance-to-destination walk.

A single customer sits in a queue whose server swaps with its neighbors
at rate beta per edge, while services elsewhere fire at rate gamma and
move the customer one step toward its destination (or absorb it within
distance 1). The distance walk on the half-line has rates: up beta,
down beta + gamma for n >= 2; at n = 1 up beta, down beta, absorb
gamma; at n = 0 up 2*beta, absorb gamma. Every state carries total rate
2*beta + gamma, so the mean number of servers that handle the customer
equals gamma times the mean absorption time.

Provides the tridiagonal linear solves (half-line and odd cycle), the
closed-form expected visit count, vectorized Monte-Carlo absorption, and
a paired circle-vs-line comparison with common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "AbsorptionModel",
    "AbsorptionSample",
    "CompareRecord",
    "absorption_times",
    "expected_visits",
    "absorption_mc",
    "circle_absorption_mc",
    "absorption_compare",
    "circle_absorption_times",
    "finite_circle_lambda",
]


@dataclass(eq=False)
class AbsorptionModel:
    """Mean absorption times T(0..n_max) from the tridiagonal solve."""

    beta: float
    gamma: float
    n_max: int
    T: np.ndarray

    @property
    def expected_visits(self) -> float:
        """Mean number of servers visited, gamma * T(0), from the solve."""
        return self.gamma * float(self.T[0])


@dataclass(frozen=True)
class AbsorptionSample:
    """Monte-Carlo absorption summary for one start distance."""

    start: int
    particles: int
    mean_time: float
    se_time: float
    mean_visits: float
    se_visits: float


@dataclass(frozen=True)
class CompareRecord:
    """Paired circle-vs-line absorption means for one start distance."""

    start: int
    trials: int
    mean_circle: float
    se_circle: float
    mean_line: float
    se_line: float
    mean_diff: float
    se_diff: float


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")


def absorption_times(beta: float, gamma: float, n_max: int = 50) -> AbsorptionModel:
    """Solve the half-line mean-absorption system for T(0..n_max).

    The recursion admits a growing homogeneous mode, so the open end is
    closed with the asymptotically linear condition T(n_max + 1) =
    T(n_max) + 1/gamma, which removes that mode exactly.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_gamma(gamma)
    if n_max < 2:
        raise ValueError(f"n_max must be at least 2, got {n_max}")
    c = 2 * beta + gamma
    n = n_max + 1
    ab = np.zeros((3, n))
    rhs = np.ones(n)
    # row 0: (2b+g) T0 - 2b T1 = 1
    ab[1, 0] = c
    ab[0, 1] = -2 * beta
    # row 1: -b T0 + (2b+g) T1 - b T2 = 1
    ab[2, 0] = -beta
    ab[1, 1] = c
    ab[0, 2] = -beta
    # rows 2..n_max-1: -(b+g) T(k-1) + (2b+g) T(k) - b T(k+1) = 1
    for k in range(2, n_max):
        ab[2, k - 1] = -(beta + gamma)
        ab[1, k] = c
        ab[0, k + 1] = -beta
    # row n_max: substitute T(n_max+1) = T(n_max) + 1/gamma
    ab[2, n_max - 1] = -(beta + gamma)
    ab[1, n_max] = beta + gamma
    rhs[n_max] = 1 + beta / gamma
    T = solve_banded((1, 1), ab, rhs)
    return AbsorptionModel(beta=beta, gamma=gamma, n_max=n_max, T=T)


def expected_visits(beta: float, gamma: float) -> float:
    """Closed-form mean number of servers visited: 1 + 2b^2/(g(3b+g))."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_gamma(gamma)
    return 1.0 + 2.0 * beta * beta / (gamma * (3.0 * beta + gamma))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _line_step(pos, u, p_up, p_swap):
    """One jump of the half-line walk; returns (new_pos, absorbed, serviced)."""
    service = u >= p_swap
    absorbed = service & (pos <= 1)
    swap_up = u < p_up
    new_pos = np.where(service, pos - 1, np.where(swap_up | (pos == 0), pos + 1, pos - 1))
    return new_pos, absorbed, service & ~absorbed


def _circle_step(pos, u, K, p_up, p_swap):
    """One jump of the cycle walk in position space with destination 0."""
    dist = np.minimum(pos, K - pos)
    service = u >= p_swap
    absorbed = service & (dist <= 1)
    toward = np.where(pos <= (K - 1) // 2, pos - 1, pos + 1)
    swap_up = u < p_up
    new_pos = np.where(service, toward, np.where(swap_up, pos + 1, pos - 1)) % K
    return new_pos, absorbed, service & ~absorbed


def absorption_mc(
    beta: float,
    gamma: float,
    start: int = 0,
    particles: int = 10**5,
    seed: int | None = None,
) -> AbsorptionSample:
    """Monte-Carlo absorption from a given start distance on the half-line.

    Simulates the embedded jump chain for all particles in vectorized
    rounds; since every state has total rate 2*beta + gamma, absorption
    times are drawn afterward as gamma variates with per-particle jump
    counts, which is exact in distribution.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_gamma(gamma)
    if start < 0:
        raise ValueError(f"start distance must be nonnegative, got {start}")
    c = 2 * beta + gamma
    p_up, p_swap = beta / c, 2 * beta / c
    rng = np.random.default_rng(seed)
    pos = np.full(particles, start, dtype=np.int64)
    jumps = np.zeros(particles, dtype=np.int64)
    visits = np.ones(particles, dtype=np.int64)
    alive = np.arange(particles)
    round_no = 0
    while alive.size:
        round_no += 1
        if round_no > 10**7:
            raise RuntimeError("absorption MC failed to terminate")
        u = rng.random(alive.size)
        new_pos, absorbed, serviced = _line_step(pos[alive], u, p_up, p_swap)
        pos[alive] = new_pos
        jumps[alive] += 1
        visits[alive] += serviced
        alive = alive[~absorbed]
    times = rng.gamma(shape=jumps.astype(np.float64), scale=1.0 / c)
    return AbsorptionSample(
        start=start,
        particles=particles,
        mean_time=float(times.mean()),
        se_time=float(times.std(ddof=1) / math.sqrt(particles)),
        mean_visits=float(visits.mean()),
        se_visits=float(visits.std(ddof=1) / math.sqrt(particles)),
    )


def circle_absorption_mc(
    beta: float,
    gamma: float,
    K: int,
    start: int = 0,
    particles: int = 10**5,
    seed: int | None = None,
) -> AbsorptionSample:
    """Monte-Carlo absorption on the odd cycle of size K, destination fixed."""
    if K < 5 or K % 2 == 0:
        raise ValueError(f"cycle size K must be odd and >= 5, got {K}")
    _check_gamma(gamma)
    if not 0 <= start <= (K - 1) // 2:
        raise ValueError(f"start distance must lie in 0..{(K - 1) // 2}, got {start}")
    c = 2 * beta + gamma
    p_up, p_swap = beta / c, 2 * beta / c
    rng = np.random.default_rng(seed)
    pos = np.full(particles, start, dtype=np.int64)
    jumps = np.zeros(particles, dtype=np.int64)
    visits = np.ones(particles, dtype=np.int64)
    alive = np.arange(particles)
    round_no = 0
    while alive.size:
        round_no += 1
        if round_no > 10**7:
            raise RuntimeError("absorption MC failed to terminate")
        u = rng.random(alive.size)
        new_pos, absorbed, serviced = _circle_step(pos[alive], u, K, p_up, p_swap)
        pos[alive] = new_pos
        jumps[alive] += 1
        visits[alive] += serviced
        alive = alive[~absorbed]
    times = rng.gamma(shape=jumps.astype(np.float64), scale=1.0 / c)
    return AbsorptionSample(
        start=start,
        particles=particles,
        mean_time=float(times.mean()),
        se_time=float(times.std(ddof=1) / math.sqrt(particles)),
        mean_visits=float(visits.mean()),
        se_visits=float(visits.std(ddof=1) / math.sqrt(particles)),
    )


def absorption_compare(
    beta: float,
    gamma: float,
    K: int,
    trials: int = 20_000,
    starts=None,
    seed: int | None = None,
) -> list[CompareRecord]:
    """Paired absorption means on the K-cycle vs the half-line.

    Each trial runs both walks from the same start distance with shared
    per-round uniforms and holding times (common random numbers), so the
    difference estimate is tight; with beta = 0 the two walks coincide
    path-by-path and the means are bit-identical.
    """
    if K < 5 or K % 2 == 0:
        raise ValueError(f"cycle size K must be odd and >= 5, got {K}")
    _check_gamma(gamma)
    half = (K - 1) // 2
    if starts is None:
        starts = range(half + 1)
    rng = np.random.default_rng(seed)
    c = 2 * beta + gamma
    p_up, p_swap = beta / c, 2 * beta / c
    out = []
    for start in starts:
        if not 0 <= start <= half:
            raise ValueError(f"start distance must lie in 0..{half}, got {start}")
        pos_c = np.full(trials, start, dtype=np.int64)
        pos_l = np.full(trials, start, dtype=np.int64)
        t_c = np.zeros(trials)
        t_l = np.zeros(trials)
        alive_c = np.ones(trials, dtype=bool)
        alive_l = np.ones(trials, dtype=bool)
        pair = np.arange(trials)
        round_no = 0
        while pair.size:
            round_no += 1
            if round_no > 10**7:
                raise RuntimeError("absorption comparison failed to terminate")
            u = rng.random(pair.size)
            e = rng.exponential(1.0 / c, pair.size)
            ac = alive_c[pair]
            al = alive_l[pair]
            idx_c = pair[ac]
            new_pos, absorbed, _ = _circle_step(pos_c[idx_c], u[ac], K, p_up, p_swap)
            pos_c[idx_c] = new_pos
            t_c[idx_c] += e[ac]
            alive_c[idx_c[absorbed]] = False
            idx_l = pair[al]
            new_pos, absorbed, _ = _line_step(pos_l[idx_l], u[al], p_up, p_swap)
            pos_l[idx_l] = new_pos
            t_l[idx_l] += e[al]
            alive_l[idx_l[absorbed]] = False
            pair = pair[alive_c[pair] | alive_l[pair]]
        diff = t_c - t_l
        out.append(
            CompareRecord(
                start=start,
                trials=trials,
                mean_circle=float(t_c.mean()),
                se_circle=float(t_c.std(ddof=1) / math.sqrt(trials)),
                mean_line=float(t_l.mean()),
                se_line=float(t_l.std(ddof=1) / math.sqrt(trials)),
                mean_diff=float(diff.mean()),
                se_diff=float(diff.std(ddof=1) / math.sqrt(trials)),
            )
        )
    return out


# ---------------------------------------------------------------------------
# finite cycle
# ---------------------------------------------------------------------------

def circle_absorption_times(beta: float, gamma: float, K: int) -> np.ndarray:
    """Mean absorption times T(0..(K-1)/2) on the odd K-cycle, exact solve.

    The distance walk on the cycle matches the half-line walk except at
    the far point n = (K-1)/2, where one swap direction keeps the
    distance unchanged; self-loops do not enter the mean-time equations,
    so the last row closes the system without a boundary approximation.
    """
    if K < 5 or K % 2 == 0:
        raise ValueError(f"cycle size K must be odd and >= 5, got {K}")
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_gamma(gamma)
    half = (K - 1) // 2
    c = 2 * beta + gamma
    n = half + 1
    ab = np.zeros((3, n))
    rhs = np.ones(n)
    ab[1, 0] = c
    ab[0, 1] = -2 * beta
    if half >= 2:
        ab[2, 0] = -beta
        ab[1, 1] = c
        ab[0, 2] = -beta
    for k in range(2, half):
        ab[2, k - 1] = -(beta + gamma)
        ab[1, k] = c
        ab[0, k + 1] = -beta
    # far point: (2b+g) T = 1 + b T (stay) + (b+g) T(half-1)
    ab[2, half - 1] = -(beta + gamma)
    ab[1, half] = beta + gamma
    return solve_banded((1, 1), ab, rhs)


def finite_circle_lambda(eta: float, beta: float, K: int) -> float:
    """Exogenous rate consistent with load eta on the odd K-cycle.

    Computes the mean number of services E[N_K] until exit for a
    customer arriving at its own destination node (gamma * T_K(0) from
    the exact cycle solve) and returns eta / E[N_K].
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    T = circle_absorption_times(beta, 1.0 - eta, K)
    visits = (1.0 - eta) * float(T[0])
    return eta / visits
