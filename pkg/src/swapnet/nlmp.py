"""Single-particle solver for the limiting mean-field dynamics.

A tagged customer's signed distance to its destination evolves as a
composition chain Q = P1 P2 on the integers: P1 adds the net swap
displacement tau accumulated over one exponential sojourn (rate
gamma = 1 - eta), and P2 is the deterministic unit step toward zero
taken at the following service. The stationary law q of Q fixes the
self-consistent rate profile of a typical queue under load eta: the
exogenous rate is lambda = eta * q_0 and the transit rate of type k is
nu_k = eta * q_k. The map eta -> lambda(eta) vanishes at both ends of
(0, 1), so every small enough lambda has two consistent loads
eta_minus < eta_plus; both are located here by bracketed root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from swapnet.absorption import expected_visits

__all__ = [
    "EPS_TRUNC",
    "TypeOffsetDistribution",
    "SingleParticleChain",
    "RateProfile",
    "tau_distribution",
    "build_chain",
    "stationary_q",
    "rates_from_eta",
    "lambda_of_eta",
    "lambda_peak",
    "find_eta_roots",
    "nu_quadratic_roots",
]

EPS_TRUNC = 1e-10
"""Tail mass allowed outside every truncated distribution or matrix row."""


@dataclass(eq=False)
class TypeOffsetDistribution:
    """Symmetric law of the net swap displacement over one sojourn.

    ``probs[k + M]`` is P(tau = k) for |k| <= M; the mass outside the
    truncation is below EPS_TRUNC and the law has mean exactly zero.
    """

    beta: float
    gamma: float
    M: int
    probs: np.ndarray

    def prob(self, k: int) -> float:
        if abs(k) > self.M:
            return 0.0
        return float(self.probs[k + self.M])


@dataclass(eq=False)
class SingleParticleChain:
    """Composition chain Q = P1 P2 on the truncated state space {-M..M}.

    P1 is the tau-shift kernel with out-of-range mass reflected onto the
    boundary states, P2 the deterministic move toward zero (s -> s-1 for
    s >= 2, s -> s+1 for s <= -2, everything in {-1, 0, 1} to 0), and Q
    their composition. ``is_point_mass`` marks the degenerate beta = 0
    case, whose stationary law is exactly the unit mass at zero.
    """

    M: int
    P1: np.ndarray
    P2: np.ndarray
    Q: np.ndarray
    tau: TypeOffsetDistribution

    @property
    def size(self) -> int:
        return 2 * self.M + 1

    @property
    def is_point_mass(self) -> bool:
        return self.tau.M == 0


@dataclass(eq=False)
class RateProfile:
    """Self-consistent rates at load eta: lam = eta*q_0, nu_k = eta*q_k."""

    eta: float
    beta: float
    lam: float
    nu: dict[int, float]
    q: np.ndarray
    M: int

    def total_rate(self) -> float:
        """lam + sum of nu_k; equals eta up to truncation error."""
        return self.lam + sum(self.nu.values())


def tau_distribution(
    beta: float, gamma: float, M: int | None = None, eps: float = EPS_TRUNC
) -> TypeOffsetDistribution:
    """Law of the displacement accumulated over an exponential sojourn.

    The number of swaps before the sojourn ends is geometric,
    P(J = j) = (g/(2b+g)) (2b/(2b+g))^j, and each swap moves the
    particle by an independent +-1 sign; the law is built by the
    sign-walk convolution recursion, truncated once the remaining
    geometric tail is below ``eps``. ``M`` may request a wider support
    than the tail criterion needs.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if beta == 0:
        M = max(M or 0, 0)
        probs = np.zeros(2 * M + 1)
        probs[M] = 1.0
        return TypeOffsetDistribution(beta=beta, gamma=gamma, M=M, probs=probs)
    c = 2 * beta + gamma
    a = 2 * beta / c
    jmax = max(1, math.ceil(math.log(eps) / math.log(a)))
    size = 2 * jmax + 1
    walk = np.zeros(size)
    walk[jmax] = 1.0
    out = np.zeros(size)
    coef = gamma / c
    for _ in range(jmax + 1):
        out += coef * walk
        coef *= a
        nxt = np.zeros(size)
        nxt[1:-1] = 0.5 * (walk[:-2] + walk[2:])
        walk = nxt
    out = 0.5 * (out + out[::-1])
    # smallest symmetric window holding all but eps of the mass
    inside = out[jmax]
    M_needed = 0
    while 1.0 - inside > eps and M_needed < jmax:
        M_needed += 1
        inside += out[jmax - M_needed] + out[jmax + M_needed]
    M_eff = max(M_needed, M or 0)
    if M_eff <= jmax:
        probs = out[jmax - M_eff : jmax + M_eff + 1].copy()
    else:
        probs = np.zeros(2 * M_eff + 1)
        probs[M_eff - jmax : M_eff + jmax + 1] = out
    return TypeOffsetDistribution(beta=beta, gamma=gamma, M=M_eff, probs=probs)


def build_chain(tau: TypeOffsetDistribution, M: int | None = None) -> SingleParticleChain:
    """Assemble P1, P2, and Q = P1 P2 on {-M..M}.

    Shift mass falling outside the window is reflected onto the nearest
    boundary state, consistent with the chain's inward drift; rows are
    then renormalized, which absorbs the sub-EPS_TRUNC truncation
    deficit of tau.
    """
    if M is None:
        M = tau.M + 2
    if M < tau.M + 2:
        raise ValueError(
            f"chain truncation M={M} too small for tau support {tau.M}; "
            f"need M >= {tau.M + 2}"
        )
    size = 2 * M + 1
    P1 = np.zeros((size, size))
    offsets = np.arange(-tau.M, tau.M + 1)
    for i in range(size):
        targets = np.clip(i + offsets, 0, size - 1)
        P1[i] = np.bincount(targets, weights=tau.probs, minlength=size)
        P1[i] /= P1[i].sum()
    states = np.arange(-M, M + 1)
    moved = np.where(states >= 2, states - 1, np.where(states <= -2, states + 1, 0))
    P2 = (moved + M).astype(np.int64)
    Q = np.zeros((size, size))
    for t in range(size):
        Q[:, P2[t]] += P1[:, t]
    return SingleParticleChain(M=M, P1=P1, P2=P2, Q=Q, tau=tau)


def stationary_q(
    chain: SingleParticleChain, tol: float = 1e-10, max_iter: int = 10**6
) -> np.ndarray:
    """Stationary law of Q by damped power iteration.

    Iterates v <- (v + vQ)/2, which shares Q's stationary law and is
    aperiodic by construction; symmetry of the law under sign flip is
    enforced at every check to suppress roundoff drift. The residual is
    the L1 norm of vQ - v on the undamped kernel.
    """
    if chain.is_point_mass:
        q = np.zeros(chain.size)
        q[chain.M] = 1.0
        return q
    Q = chain.Q
    v = np.full(chain.size, 1.0 / chain.size)
    check_every = 10
    for it in range(0, max_iter, check_every):
        for _ in range(check_every):
            v = 0.5 * (v + v @ Q)
        v = 0.5 * (v + v[::-1])
        v /= v.sum()
        residual = float(np.abs(v @ Q - v).sum())
        if residual < tol:
            return v
    raise RuntimeError(
        f"stationary law did not converge within {max_iter} iterations "
        f"(residual {residual:.3e}, tol {tol:.1e})"
    )


def rates_from_eta(
    eta: float, beta: float, tol_lambda: float = 1e-6
) -> RateProfile:
    """Self-consistent rate profile at load eta via the stationary law of Q.

    The truncation is doubled until the implied exogenous rate
    lambda = eta * q_0 is stable to ``tol_lambda``.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    tau = tau_distribution(beta, 1.0 - eta)
    M = tau.M + 2
    prev_lam = None
    while True:
        chain = build_chain(tau, M)
        q = stationary_q(chain)
        lam = eta * float(q[M])
        if prev_lam is not None and abs(lam - prev_lam) < tol_lambda:
            break
        if M > 200_000:
            raise RuntimeError(f"lambda(eta) not stable under truncation growth at M={M}")
        prev_lam = lam
        M *= 2
    nu = {
        int(k): eta * float(q[k + M])
        for k in range(-M, M + 1)
        if k != 0
    }
    return RateProfile(eta=eta, beta=beta, lam=lam, nu=nu, q=q, M=M)


def _lambda_eval(eta: float, beta: float, method: str) -> float:
    if method == "closed_form":
        return eta / expected_visits(beta, 1.0 - eta)
    if method == "chain":
        return rates_from_eta(eta, beta).lam
    raise ValueError(f"unknown method {method!r}; use 'closed_form' or 'chain'")


def lambda_of_eta(eta_grid, beta: float, method: str = "closed_form"):
    """The curve eta -> lambda(eta) on a grid inside (0, 1).

    The default route divides eta by the closed-form mean number of
    servers visited; ``method='chain'`` instead reads eta * q_0 off the
    stationary law, which agrees up to truncation error and is much
    slower.
    """
    out = []
    for eta in eta_grid:
        if not 0 < eta < 1:
            raise ValueError(f"eta grid values must lie in (0, 1), got {eta}")
        out.append((float(eta), _lambda_eval(float(eta), beta, method)))
    return out


def lambda_peak(beta: float, method: str = "closed_form") -> tuple[float, float]:
    """Location and height (eta_peak, lambda_plus) of the curve maximum."""
    res = minimize_scalar(
        lambda eta: -_lambda_eval(eta, beta, method),
        bounds=(1e-9, 1 - 1e-9),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(-res.fun)


def find_eta_roots(
    lambda_target: float,
    beta: float,
    tol: float = 1e-8,
    method: str = "closed_form",
) -> tuple[float, float] | None:
    """Both loads consistent with a given exogenous rate, or None.

    Returns (eta_minus, eta_plus) with lambda(eta) = lambda_target on
    the rising and falling branches of the curve; None when the target
    exceeds the curve maximum (see lambda_peak for that value). As the
    target decreases, eta_minus -> 0 and eta_plus -> 1.
    """
    if lambda_target <= 0:
        raise ValueError(f"lambda target must be positive, got {lambda_target}")
    eta_peak, lam_peak = lambda_peak(beta, method)
    if lambda_target >= lam_peak:
        return None
    f = lambda eta: _lambda_eval(eta, beta, method) - lambda_target

    lo_edge = min(1e-9, lambda_target / 10)
    hi_edge = 1 - min(1e-9, lambda_target / 10)
    eta_minus = float(brentq(f, lo_edge, eta_peak, xtol=1e-14))
    eta_plus = float(brentq(f, eta_peak, hi_edge, xtol=1e-14))
    for root in (eta_minus, eta_plus):
        resid = abs(f(root))
        if resid > tol:
            raise RuntimeError(
                f"root residual {resid:.3e} exceeds tolerance {tol:.1e} at eta={root}"
            )
    return eta_minus, eta_plus


def nu_quadratic_roots(lam: float, beta: float) -> tuple[float, float] | None:
    """Roots of 3 nu^2 - 3 nu (1 - lam) + 2 lam beta = 0, the large-beta
    reduction of the equilibrium condition; None when the discriminant
    (1 - lam)^2 - (8/3) lam beta is negative."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    disc = (1.0 - lam) ** 2 - (8.0 / 3.0) * lam * beta
    if disc < 0:
        return None
    root = math.sqrt(disc)
    return ((1.0 - lam) - root) / 2.0, ((1.0 - lam) + root) / 2.0
