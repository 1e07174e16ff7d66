"""Statistics extracted from network simulations.

Four estimators probe the facts that drive the heavy-traffic picture:
the per-queue drift while all queues are deep, the mixing of a tagged
server's position toward uniform, the exit probability of a customer
observed deep in a queue, and the uniformity of the server label that
receives a deep customer's transit jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from swapnet.simulate import SimConfig, Trajectory, level_state, simulate

__all__ = [
    "DriftEstimate",
    "MixingEstimate",
    "ExitEstimate",
    "JumpTargetResult",
    "embedded_chain_samples",
    "estimate_drift",
    "permutation_mixing",
    "exit_probability_estimate",
    "jump_target_uniformity",
]


@dataclass(frozen=True)
class DriftEstimate:
    """Per-server queue growth rate with a 95% block-based interval."""

    rate: float
    half_width: float
    per_block: float
    spacing: int
    blocks_used: int
    blocks_total: int


@dataclass(frozen=True)
class MixingEstimate:
    """Total-variation distance of a tagged server's position from uniform."""

    tv: float
    t: float
    trials: int
    counts: np.ndarray


@dataclass(frozen=True)
class ExitEstimate:
    """Fraction of deep-tagged customers that exit at their next service."""

    probability: float
    observations: int
    ci_half_width: float


@dataclass(frozen=True)
class JumpTargetResult:
    """Counts of receiving-server labels for deep transits, with a
    chi-square test against the uniform law on the other labels.
    ``chi2``/``p_value`` are None when no transit ever occurs (diameter
    <= 1, where every service is an exit)."""

    transits: int
    counts: np.ndarray
    chi2: float | None
    p_value: float | None


def embedded_chain_samples(traj: Trajectory, spacing: int) -> np.ndarray:
    """Queue-length vectors after every ``spacing``-th event.

    Requires a trajectory recorded with record_events=True. With 100
    events and spacing 10 this returns 10 rows.
    """
    if traj.event_queue_lengths is None:
        raise ValueError("trajectory lacks event-level records (record_events=False)")
    if spacing < 1:
        raise ValueError(f"spacing must be positive, got {spacing}")
    n_events = traj.event_queue_lengths.shape[0]
    if spacing > n_events:
        raise ValueError(f"spacing {spacing} exceeds recorded event count {n_events}")
    return traj.event_queue_lengths[spacing - 1 :: spacing].copy()


def default_spacing(config: SimConfig) -> int:
    """Events between embedded samples: 50 * nodes * max(1, beta)."""
    return int(round(50 * config.node_count * max(1.0, config.beta)))


def estimate_drift(
    config: SimConfig,
    spacing: int | None = None,
    block_count: int = 100,
    min_queue: int | None = None,
    initial_level: int | None = None,
) -> DriftEstimate:
    """Mean queue-length drift per unit time while queues stay deep.

    Runs from a uniformly high initial state and averages per-server
    queue increments over blocks of ``spacing`` events, keeping only
    blocks during which every queue stays above ``min_queue`` (so the
    estimate reflects the all-busy regime). Raises RuntimeError when
    fewer than half the blocks qualify.
    """
    if spacing is None:
        spacing = default_spacing(config)
    if spacing < 1:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if block_count < 2:
        raise ValueError(f"need at least 2 blocks, got {block_count}")
    if min_queue is None:
        min_queue = 2 * spacing
    if initial_level is None:
        initial_level = 4 * spacing

    cfg = replace(
        config,
        record_events=True,
        max_events=spacing * block_count,
        horizon=None,
        record_interval=None,
    )
    traj = simulate(cfg, level_state(cfg, initial_level))
    lengths = traj.event_queue_lengths
    times = traj.event_times
    n_servers = lengths.shape[1]
    if lengths.shape[0] < spacing * block_count:
        raise RuntimeError(
            f"run ended after {lengths.shape[0]} events, "
            f"needed {spacing * block_count}"
        )

    first_row = np.full(n_servers, initial_level, dtype=np.int64)
    boundary_rows = np.vstack([first_row, lengths[spacing - 1 :: spacing]])
    boundary_times = np.concatenate([[0.0], times[spacing - 1 :: spacing]])

    deltas = np.diff(boundary_rows.mean(axis=1))
    dts = np.diff(boundary_times)
    block_mins = lengths.reshape(block_count, spacing, n_servers).min(axis=(1, 2))
    valid = block_mins > min_queue

    used = int(valid.sum())
    if used < max(2, block_count // 2):
        raise RuntimeError(
            f"insufficient data: only {used}/{block_count} blocks kept every "
            f"queue above {min_queue}"
        )
    rates = deltas[valid] / dts[valid]
    rate = float(rates.mean())
    half = float(1.96 * rates.std(ddof=1) / math.sqrt(used))
    return DriftEstimate(
        rate=rate,
        half_width=half,
        per_block=float(deltas[valid].mean()),
        spacing=spacing,
        blocks_used=used,
        blocks_total=block_count,
    )


def permutation_mixing(config: SimConfig, t: float, trials: int) -> MixingEstimate:
    """TV distance between a tagged server's position at time t and uniform.

    Swap clocks never look at the queues, so the tagged server's base
    vertex is an autonomous random walk: it moves across each incident
    base edge at the pairwise swap rate times the number of partner
    replicas (beta under per-pair normalization, beta/N under
    per-edge). The walk is simulated exactly by uniformization at the
    maximum-degree rate, with a lazy hold filling the degree gap. At
    t=0 the distance is exactly 1 - 1/|V|.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    G = config.topology
    V = G.vertex_count
    g = G.degree
    move_rate = config.beta
    if config.replica_count > 1 and config.swap_normalization == "per_edge":
        move_rate = config.beta / config.replica_count

    rng = np.random.default_rng(config.seed)
    nbr = np.full((V, g), -1, dtype=np.int64)
    for v in range(V):
        row = G.neighbor_idx[v]
        nbr[v, : len(row)] = row

    n_jumps = rng.poisson(g * move_rate * t, size=trials)
    pos = np.zeros(trials, dtype=np.int64)
    for step in range(int(n_jumps.max()) if trials else 0):
        active = n_jumps > step
        draws = rng.integers(0, g, size=int(active.sum()))
        cand = nbr[pos[active], draws]
        moved = np.where(cand >= 0, cand, pos[active])
        pos[active] = moved
    counts = np.bincount(pos, minlength=V)
    tv = 0.5 * float(np.abs(counts / trials - 1.0 / V).sum())
    return MixingEstimate(tv=tv, t=t, trials=trials, counts=counts)


def _all_busy_rate(config: SimConfig) -> float:
    n = config.node_count
    edges = len(config.topology.edge_list())
    swap = config.beta * edges
    if config.replica_count > 1 and config.swap_normalization == "per_pair":
        swap *= config.replica_count
    return config.lambda_total * n + n + swap


def exit_probability_estimate(
    config: SimConfig,
    position_threshold: int,
    trials: int,
    initial_level: int | None = None,
) -> ExitEstimate:
    """Exit fraction among services of customers once observed at queue
    position >= position_threshold.

    Runs from a high uniform level so queues stay deep; each customer
    appended at or beyond the threshold (including the initial load) is
    tagged and its next service completion counted as exit or transit.
    """
    if position_threshold < 1:
        raise ValueError(f"position_threshold must be >= 1, got {position_threshold}")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    if initial_level is None:
        initial_level = 2 * position_threshold + 50

    n = config.node_count
    rate = _all_busy_rate(config)
    # services arrive as a fraction n/rate of all events; pad for the
    # untagged head-of-queue customers served first
    max_events = math.ceil(1.6 * trials * rate / n) + 4 * n * position_threshold
    cfg = replace(
        config,
        deep_threshold=position_threshold,
        max_events=max_events,
        horizon=None,
    )
    traj = simulate(cfg, level_state(cfg, initial_level))
    got = traj.deep_services
    if got < trials:
        raise RuntimeError(f"insufficient deep services: {got} < {trials}")
    p = traj.deep_exits / got
    half = 1.96 * math.sqrt(p * (1.0 - p) / got)
    return ExitEstimate(probability=p, observations=got, ci_half_width=half)


def jump_target_uniformity(
    config: SimConfig,
    trials: int,
    position_threshold: int = 50,
    initial_level: int | None = None,
) -> JumpTargetResult:
    """Distribution of the server label receiving a deep customer's hop.

    For each recorded transit of a tagged customer the receiving
    server's label is ranked among the labels other than the sender's,
    and the counts are chi-square tested against uniform. Only defined
    on the plain network (replica_count 1). On graphs of diameter <= 1
    every service exits, so the result reports zero transits.
    """
    if config.replica_count != 1:
        raise ValueError("jump_target_uniformity requires replica_count == 1")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    G = config.topology
    V = G.vertex_count
    if int(G.dist.max()) <= 1:
        return JumpTargetResult(
            transits=0, counts=np.zeros(V - 1, dtype=np.int64), chi2=None, p_value=None
        )
    if initial_level is None:
        initial_level = 2 * position_threshold + 50

    transit_share = max(0.05, (V - G.degree - 1) / V)
    rate = _all_busy_rate(config)
    max_events = math.ceil(2.0 * trials / transit_share * rate / V) + 4 * V * position_threshold
    cfg = replace(
        config,
        deep_threshold=position_threshold,
        max_events=max_events,
        horizon=None,
    )
    traj = simulate(cfg, level_state(cfg, initial_level))
    pairs = traj.transit_targets[:]
    if len(pairs) < trials:
        raise RuntimeError(f"insufficient transits: {len(pairs)} < {trials}")

    counts = np.zeros(V - 1, dtype=np.int64)
    for src, dst in pairs:
        counts[dst if dst < src else dst - 1] += 1
    chi2, p_value = stats.chisquare(counts)
    return JumpTargetResult(
        transits=len(pairs), counts=counts, chi2=float(chi2), p_value=float(p_value)
    )
