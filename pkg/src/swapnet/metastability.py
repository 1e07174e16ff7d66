"""Metastable lifetimes and equilibrium comparisons for finite networks.

In the regime where the mean-field limit has equilibria but the finite
network is transient, the network lingers near the lower equilibrium
before diverging. ``metastable_lifetime`` measures the onset of
divergence (first time every queue exceeds a threshold) over
independent runs; ``lifetime_trend`` rank-tests that onsets grow with
the replica count; ``equilibrium_comparison`` checks how well a
pre-divergence window matches the geometric law and transit rates of a
solver equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from swapnet.nlmp import RateProfile
from swapnet.seeds import derive_seed
from swapnet.simulate import (
    CustomerRecord,
    NetworkState,
    SimConfig,
    empty_state,
    simulate,
)

__all__ = [
    "LifetimeSummary",
    "LifetimeEstimate",
    "TrendResult",
    "ComparisonReport",
    "default_divergence_threshold",
    "metastable_lifetime",
    "lifetime_trend",
    "equilibrium_comparison",
]


@dataclass(frozen=True)
class LifetimeSummary:
    median: float
    q1: float
    q3: float


@dataclass(frozen=True)
class LifetimeEstimate:
    """Divergence-onset times over independent runs at one replica count.

    Censored runs never crossed the threshold within the horizon; their
    entries hold the horizon itself, so every quantile is a lower bound
    when censoring is present."""

    N: int
    threshold: int
    horizon: float
    hitting_times: tuple
    censored: tuple
    summary: LifetimeSummary

    @property
    def runs(self) -> int:
        return len(self.hitting_times)

    @property
    def observed(self) -> int:
        return sum(1 for c in self.censored if not c)


@dataclass(frozen=True)
class TrendResult:
    """Pairwise one-sided rank tests for lifetimes increasing with N."""

    pairs: tuple  # (N_low, N_high, p_value) per consecutive pair
    medians: tuple
    increasing: bool

    def significant(self, level: float = 0.05) -> bool:
        return self.increasing and all(p < level for _, _, p in self.pairs)


@dataclass(frozen=True)
class ComparisonReport:
    """Window statistics of a run against a solver equilibrium."""

    eta: float
    window: tuple
    mean_queue: float
    target_mean: float
    mean_ratio: float
    geometric_p: float
    max_discrepancy: float
    nu_table: dict
    nu_max_discrepancy: float
    divergence_flag: bool
    onset_time: float | None


def default_divergence_threshold(eta: float) -> int:
    """Queue level marking departure from the eta equilibrium: ten times
    the equilibrium mean queue length."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must be in (0,1), got {eta}")
    return math.ceil(10.0 * eta / (1.0 - eta))


def _geometric_state(config: SimConfig, eta: float, seed: int) -> NetworkState:
    """Queues seeded iid geometric(eta), destinations at their own node."""
    rng = np.random.default_rng(seed)
    state = empty_state(config)
    N = config.replica_count
    for node, q in enumerate(state.queues):
        level = rng.geometric(1.0 - eta) - 1  # support starts at 0
        base = node // N
        for _ in range(level):
            q.append(CustomerRecord(destination=base, arrival_time=0.0))
    return state


def metastable_lifetime(
    config: SimConfig,
    threshold: int,
    runs: int,
    start_eta: float | None = None,
) -> LifetimeEstimate:
    """First time the minimum queue length exceeds ``threshold`` per run.

    Runs start from empty queues (or geometric(start_eta) seeded ones)
    and are right-censored at config.horizon. Sub-seeds derive from
    config.seed and the run index, so the estimate is reproducible and
    runs could execute in any order.
    """
    if config.horizon is None:
        raise ValueError("config.horizon is required for censoring")
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    if runs < 1:
        raise ValueError(f"runs must be positive, got {runs}")

    times = []
    censored = []
    for run in range(runs):
        seed = derive_seed(config.seed, "lifetime", config.replica_count, run)
        cfg = replace(config, seed=seed, stop_min_queue=threshold, max_events=None)
        initial = (
            _geometric_state(cfg, start_eta, derive_seed(seed, "init"))
            if start_eta is not None
            else None
        )
        traj = simulate(cfg, initial)
        if traj.stopped_at is None:
            times.append(config.horizon)
            censored.append(True)
        else:
            times.append(traj.stopped_at)
            censored.append(False)
    arr = np.array(times)
    summary = LifetimeSummary(
        median=float(np.median(arr)),
        q1=float(np.quantile(arr, 0.25)),
        q3=float(np.quantile(arr, 0.75)),
    )
    return LifetimeEstimate(
        N=config.replica_count,
        threshold=threshold,
        horizon=config.horizon,
        hitting_times=tuple(float(t) for t in times),
        censored=tuple(censored),
        summary=summary,
    )


def lifetime_trend(estimates: list[LifetimeEstimate]) -> TrendResult:
    """One-sided Mann-Whitney tests between consecutive replica counts.

    Censored entries stay at the horizon, an under-estimate of the true
    onset, so evidence for larger lifetimes at larger N is conservative.
    """
    if len(estimates) < 2:
        raise ValueError("need at least two replica counts to test a trend")
    ordered = sorted(estimates, key=lambda e: e.N)
    if len({e.N for e in ordered}) != len(ordered):
        raise ValueError("duplicate replica counts")
    pairs = []
    for lo, hi in zip(ordered, ordered[1:]):
        _, p = stats.mannwhitneyu(hi.hitting_times, lo.hitting_times,
                                  alternative="greater")
        pairs.append((lo.N, hi.N, float(p)))
    medians = tuple(e.summary.median for e in ordered)
    increasing = all(a < b for a, b in zip(medians, medians[1:]))
    return TrendResult(pairs=tuple(pairs), medians=medians, increasing=increasing)


def equilibrium_comparison(
    config: SimConfig,
    profile: RateProfile,
    window: tuple,
    snapshot_spacing: float = 10.0,
    threshold: int | None = None,
) -> ComparisonReport:
    """Compare a simulation window against the profile's equilibrium.

    One run covers [0, window end]; if the divergence threshold is
    crossed the run is flagged and continued past the crossing, so late
    windows still produce statistics (which are then expected to fail
    the geometric fit). The geometric chi-square uses queue-length
    snapshots ``snapshot_spacing`` apart; the occupancy-based maximum
    discrepancy and the per-displacement transit rates use exact
    time-weighted tallies.
    """
    t0, t1 = window
    if not 0 <= t0 < t1:
        raise ValueError(f"bad window {window}")
    if threshold is None:
        threshold = default_divergence_threshold(profile.eta)

    base = replace(
        config,
        horizon=t1,
        max_events=None,
        record_occupancy=True,
        occupancy_start=t0,
        record_interval=snapshot_spacing,
        stop_min_queue=threshold,
    )
    first = simulate(base)
    onset = first.stopped_at
    occ = dict(first.occupancy)
    type_counts = dict(first.transit_type_counts)
    duration = first.occupancy_duration
    rows = [
        row
        for t, row in zip(first.sample_times, first.queue_lengths)
        if t0 <= t <= t1
    ]
    if onset is not None:
        resume = replace(
            base,
            seed=derive_seed(config.seed, "post-onset"),
            stop_min_queue=None,
            occupancy_start=max(t0, onset),
        )
        second = simulate(resume, first.final_state)
        for k, v in second.occupancy.items():
            occ[k] = occ.get(k, 0.0) + v
        for k, v in second.transit_type_counts.items():
            type_counts[k] = type_counts.get(k, 0) + v
        duration += second.occupancy_duration
        rows.extend(
            row
            for t, row in zip(second.sample_times, second.queue_lengths)
            if t0 <= t <= t1
        )

    n_servers = config.node_count
    eta = profile.eta
    total_weight = duration * n_servers
    mean_queue = sum(h * w for h, w in occ.items()) / total_weight
    target_mean = eta / (1.0 - eta)

    max_len = max(occ) if occ else 0
    emp = np.array([occ.get(l, 0.0) for l in range(max_len + 1)]) / total_weight
    geo = (1 - eta) * eta ** np.arange(max_len + 1)
    max_disc = float(np.abs(emp - geo).max())

    samples = np.concatenate([np.asarray(r) for r in rows]) if rows else np.array([])
    geometric_p = _snapshot_geometric_p(samples, eta)

    nu_table = {}
    nu_max = 0.0
    if config.topology.kind == "cycle":
        # displacement wraps at +-half on the cycle, so transits of type
        # +-half cannot occur (they would need a head past the wrap);
        # only smaller displacements are comparable with the line model
        half = (config.topology.vertex_count - 1) // 2
        kmax = min(3, half - 1)
        for k in range(-kmax, kmax + 1):
            if k == 0:
                continue
            rate = type_counts.get(k, 0) / (duration * n_servers)
            target = profile.nu.get(k, 0.0)
            nu_table[k] = (rate, target)
            nu_max = max(nu_max, abs(rate - target))

    return ComparisonReport(
        eta=eta,
        window=(t0, t1),
        mean_queue=mean_queue,
        target_mean=target_mean,
        mean_ratio=mean_queue / target_mean,
        geometric_p=geometric_p,
        max_discrepancy=max_disc,
        nu_table=nu_table,
        nu_max_discrepancy=nu_max,
        divergence_flag=onset is not None and onset < t1,
        onset_time=onset,
    )


def _snapshot_geometric_p(samples: np.ndarray, eta: float) -> float:
    """Chi-square of pooled queue-length snapshots against geometric(eta)."""
    n = samples.size
    if n < 100:
        return float("nan")
    max_len = int(samples.max())
    counts = np.bincount(samples.astype(np.int64), minlength=max_len + 1).tolist()
    probs = [(1 - eta) * eta**l for l in range(max_len + 1)]
    probs[-1] += eta ** (max_len + 1)
    while len(counts) > 2 and probs[-1] * n < 5:
        probs[-2] += probs[-1]
        counts[-2] += counts[-1]
        probs.pop()
        counts.pop()
    _, p = stats.chisquare(counts, f_exp=[p * n for p in probs])
    return float(p)
