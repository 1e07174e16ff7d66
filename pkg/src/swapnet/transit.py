"""Stationary transit rates through a tagged server.

With all servers busy and their positions uniformly permuted over the
vertices, a served customer either exits (within distance 1 of its
destination) or hops to a uniformly chosen next-hop neighbor. The
transit rate p is the probability that such a hop lands on a fixed
tagged server. Exposed here as an exact closed form for regular graphs,
an exact brute-force average over all placements, and a Monte-Carlo
estimate for graphs too large to enumerate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from swapnet.topology import GraphTopology

__all__ = [
    "TransitRateResult",
    "closed_form_p",
    "brute_force_p",
    "monte_carlo_p",
    "critical_size",
]

ENUMERATION_BOUND = 10
"""Largest vertex count for which brute_force_p will enumerate |V|!."""


@dataclass(frozen=True)
class TransitRateResult:
    """Monte-Carlo transit-rate estimate with a 95% confidence half-width."""

    value: float
    method: str
    samples: int | None = None
    ci_half_width: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"transit rate must lie in [0, 1], got {self.value}")


def closed_form_p(G: GraphTopology) -> Fraction:
    """Exact stationary transit rate (|V| - (g+1)) / |V| for regular graphs.

    Specializes to (K-3)/K on cycles and (KL-5)/(KL) on tori. For
    non-regular graphs only the lower bound with g = max degree holds,
    so they are rejected here; use monte_carlo_p instead.
    """
    if not G.is_regular:
        raise ValueError(
            "closed form requires a regular graph; for non-regular graphs only "
            "a lower bound holds; estimate with monte_carlo_p instead"
        )
    return Fraction(G.vertex_count - (G.degree + 1), G.vertex_count)


def brute_force_p(G: GraphTopology, dest_map=None, j: int = 0) -> Fraction:
    """Exact transit rate onto tagged server j, averaged over all placements.

    Enumerates every permutation of server positions and sums, for each
    server i, the probability that the customer served at i's node hops
    onto server j's node. Tie-broken hops contribute fractional weight
    1/|W| per candidate, so the result is an exact rational. For regular
    graphs the value is independent of both the destination map and j.

    Parameters
    ----------
    G : GraphTopology
        Graph with at most ``ENUMERATION_BOUND`` vertices.
    dest_map : mapping or sequence, optional
        Destination vertex for each server index 0..|V|-1; defaults to
        server i targeting vertex i of the canonical order.
    j : int
        Tagged server index.
    """
    K = G.vertex_count
    if K > ENUMERATION_BOUND:
        raise ValueError(
            f"|V|={K} exceeds the enumeration bound {ENUMERATION_BOUND} "
            f"({K}! placements); use monte_carlo_p"
        )
    if not 0 <= j < K:
        raise ValueError(f"tagged server index {j} out of range 0..{K - 1}")
    d = _dest_indices(G, dest_map)
    weights, scale = _hop_weight_table(G)
    total = 0
    for perms in _permutation_chunks(K, 200_000):
        pj = perms[:, j]
        for i in range(K):
            total += int(weights[perms[:, i], d[i], pj].sum())
    return Fraction(total, math.factorial(K) * scale)


def monte_carlo_p(
    G: GraphTopology,
    dest_map=None,
    samples: int = 10**5,
    seed: int | None = None,
    j: int = 0,
) -> TransitRateResult:
    """Transit-rate estimate from uniformly random server placements.

    For each sampled permutation the per-placement transit probability
    onto server j is evaluated exactly (tie-breaks averaged, not
    sampled), so the estimator is unbiased with reduced variance. The
    confidence half-width is the 95% normal-approximation interval from
    the empirical variance; identical seeds give identical results.
    """
    if samples < 10**4:
        raise ValueError(f"need at least 10^4 samples for a usable estimate, got {samples}")
    K = G.vertex_count
    if not 0 <= j < K:
        raise ValueError(f"tagged server index {j} out of range 0..{K - 1}")
    d = _dest_indices(G, dest_map)
    weights, scale = _hop_weight_table(G)
    wf = weights.astype(np.float64) / scale
    rng = np.random.default_rng(seed)
    base = np.tile(np.arange(K, dtype=np.int64), (1, 1))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        b = min(20_000, samples - done)
        if base.shape[0] != b:
            base = np.tile(np.arange(K, dtype=np.int64), (b, 1))
        perms = rng.permuted(base, axis=1)
        x = np.zeros(b)
        pj = perms[:, j]
        for i in range(K):
            x += wf[perms[:, i], d[i], pj]
        total += float(x.sum())
        total_sq += float(x @ x)
        done += b
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    half = 1.96 * math.sqrt(var / samples)
    return TransitRateResult(value=mean, method="monte_carlo", samples=samples, ci_half_width=half)


def critical_size(lam: float, g: int) -> float:
    """Critical network size (g+1)/lam; sizes above it are transient.

    Reduces to 3/lam on cycles (g=2) and 5/lam on tori (g=4).
    """
    if lam <= 0:
        raise ValueError(f"arrival rate must be positive, got {lam}")
    if g < 1:
        raise ValueError(f"degree must be a positive integer, got {g}")
    return (g + 1) / lam


def _dest_indices(G: GraphTopology, dest_map) -> list[int]:
    K = G.vertex_count
    if dest_map is None:
        return list(range(K))
    if isinstance(dest_map, dict):
        try:
            labels = [dest_map[i] for i in range(K)]
        except KeyError as exc:
            raise ValueError(f"destination map missing server index {exc}") from None
    else:
        labels = list(dest_map)
        if len(labels) != K:
            raise ValueError(f"destination map has {len(labels)} entries, need {K}")
    return [G.index[v] for v in labels]


def _hop_weight_table(G: GraphTopology):
    """Integer hop weights: weights[u, d, w] = scale / |W(u, d)| for w in W(u, d)."""
    K = G.vertex_count
    sizes = {
        len(G.hop_idx[u][d]) for u in range(K) for d in range(K) if G.hop_idx[u][d]
    }
    scale = math.lcm(*sizes) if sizes else 1
    weights = np.zeros((K, K, K), dtype=np.int64)
    for u in range(K):
        for d in range(K):
            hops = G.hop_idx[u][d]
            if hops:
                w = scale // len(hops)
                for t in hops:
                    weights[u, d, t] = w
    return weights, scale


def _permutation_chunks(K: int, chunk: int):
    it = itertools.permutations(range(K))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64)
