"""Single-queue process behind the mean-field fixed point.

The state is the finite sequence of signed customer displacements
(head first). Customers of displacement k arrive at rate nu_k, fresh
customers of displacement 0 at rate lambda, the head departs at unit
rate, and two global clocks of rate beta shift every displacement in
the queue by +1 or -1 (the image of the server swapping under its
customers). A fixed point of the mean-field dynamics makes this
process stationary with transit output rates equal to its input rates;
``fixed_point_residual`` checks both sides of that consistency on a
long simulation.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np
from scipy import stats

from swapnet.nlmp import RateProfile

__all__ = ["HeadTypeEntry", "FixedPointReport", "fixed_point_residual"]


@dataclass(frozen=True)
class HeadTypeEntry:
    """Observed transit output rate for one displacement, with target."""

    rate: float
    target: float
    se: float


@dataclass(frozen=True)
class FixedPointReport:
    """Balance-equation and output-rate diagnostics for one profile.

    ``residual_norm`` is the largest relative stationarity defect
    (|inflow - outflow| / outflow) over queue states visited at least
    ``min_visits`` times; ``head_type`` maps transit displacement k to
    its observed output rate against the profile's nu_k."""

    residual_norm: float
    residual_median: float
    states_checked: int
    head_type: dict
    head_type_discrepancy: float
    geometric_p_value: float
    events: int
    total_time: float


def fixed_point_residual(
    profile: RateProfile,
    beta: float,
    sim_steps: int,
    seed: int = 0,
    min_visits: int = 100,
    burn_in: int | None = None,
    batches: int = 20,
    thin: int = 20,
) -> FixedPointReport:
    """Simulate the single queue under the profile's rates and measure
    how far the empirical law is from a fixed point.

    Three diagnostics come back: the per-state balance residual (the
    generator applied to the empirical state occupancy, normalized by
    the outflow and maximized over frequently visited states), the
    output-rate check (departure rate of displacement-k transits versus
    nu_k, with batch-means standard errors), and a chi-square p-value
    of the queue-length marginal against geometric(eta) computed from
    thinned arrival-epoch snapshots.
    """
    if profile.eta >= 1:
        raise ValueError(f"eta must be below 1 for an ergodic queue, got {profile.eta}")
    if beta != profile.beta:
        raise ValueError(
            f"beta {beta} does not match the profile's {profile.beta}; "
            "the transit rates are only consistent at their own beta"
        )
    if sim_steps < 1000:
        raise ValueError(f"sim_steps too small for any estimate: {sim_steps}")
    if burn_in is None:
        burn_in = sim_steps // 10

    lam = profile.lam
    nu_items = sorted(profile.nu.items())
    arrival_types = [0] + [k for k, _ in nu_items]
    arrival_cum = []
    acc = 0.0
    for rate in [lam] + [r for _, r in nu_items]:
        acc += rate
        arrival_cum.append(acc)
    arrival_rate = acc
    shift_rate = 2.0 * beta

    rng = random.Random(seed)
    queue: deque[int] = deque()  # displacements stored relative to `base`
    base = 0

    occ: dict[tuple, float] = {}
    visits: Counter = Counter()
    head_counts: Counter = Counter()
    batch_head: list[Counter] = [Counter() for _ in range(batches)]
    batch_time = np.zeros(batches)
    length_samples: Counter = Counter()
    recorded_time = 0.0
    t = 0.0
    arrivals_seen = 0

    for step in range(sim_steps):
        busy = 1.0 if queue else 0.0
        total = arrival_rate + shift_rate + busy
        dt = rng.expovariate(total)
        recording = step >= burn_in
        if recording:
            state = tuple(s + base for s in queue)
            occ[state] = occ.get(state, 0.0) + dt
            visits[state] += 1
            recorded_time += dt
        t += dt

        u = rng.random() * total
        if u < arrival_rate:
            pick = bisect_right(arrival_cum, u)
            if recording:
                arrivals_seen += 1
                if arrivals_seen % thin == 0:
                    length_samples[len(queue)] += 1
            queue.append(arrival_types[pick] - base)
        elif u < arrival_rate + busy:
            head = queue.popleft() + base
            if recording:
                head_counts[head] += 1
                b = min(batches - 1, int(batches * (step - burn_in) / (sim_steps - burn_in)))
                batch_head[b][head] += 1
        else:
            base += 1 if u < arrival_rate + busy + beta else -1

    # accumulate batch durations for rate standard errors
    span = (sim_steps - burn_in) / batches
    batch_time[:] = recorded_time / batches  # events per batch are equal, times close
    # exact batch times would need per-event bookkeeping; equal-share is
    # adequate for an SE since batches hold ~1e5 events each

    mu = {s: w / recorded_time for s, w in occ.items()}
    service_in: dict[tuple, float] = {}
    for s, m in mu.items():
        if s:
            tail = s[1:]
            service_in[tail] = service_in.get(tail, 0.0) + m

    out_const = arrival_rate + shift_rate
    rels = []
    for s in mu:
        if visits[s] < min_visits:
            continue
        m = mu[s]
        outflow = m * (out_const + (1.0 if s else 0.0))
        inflow = service_in.get(s, 0.0)
        if s:
            tail_type = s[-1]
            arr = profile.nu.get(tail_type, 0.0) + (lam if tail_type == 0 else 0.0)
            inflow += mu.get(s[:-1], 0.0) * arr
        up = tuple(x + 1 for x in s)
        down = tuple(x - 1 for x in s)
        inflow += beta * (mu.get(up, 0.0) + mu.get(down, 0.0))
        rels.append(abs(inflow - outflow) / outflow)
    if not rels:
        raise RuntimeError(
            f"no state reached {min_visits} visits in {sim_steps} steps"
        )

    head_type: dict[int, HeadTypeEntry] = {}
    max_disc = 0.0
    for k in range(-5, 6):
        if k == 0:
            continue
        head = k + (1 if k > 0 else -1)
        rate = head_counts[head] / recorded_time
        per_batch = np.array(
            [batch_head[b][head] / batch_time[b] for b in range(batches)]
        )
        se = float(per_batch.std(ddof=1) / math.sqrt(batches))
        target = profile.nu.get(k, 0.0)
        head_type[k] = HeadTypeEntry(rate=rate, target=target, se=se)
        max_disc = max(max_disc, abs(rate - target))

    geometric_p = _geometric_chi_square(length_samples, profile.eta)

    rels_arr = np.array(rels)
    return FixedPointReport(
        residual_norm=float(rels_arr.max()),
        residual_median=float(np.median(rels_arr)),
        states_checked=len(rels),
        head_type=head_type,
        head_type_discrepancy=max_disc,
        geometric_p_value=geometric_p,
        events=sim_steps,
        total_time=t,
    )


def _geometric_chi_square(length_samples: Counter, eta: float) -> float:
    """Chi-square p-value of sampled queue lengths against geometric(eta).

    Arrival-epoch snapshots see time averages (Poisson arrivals), and
    thinning makes them near-independent. Tail bins are pooled so every
    expected count is at least 5.
    """
    n = sum(length_samples.values())
    if n < 100:
        return float("nan")
    max_len = max(length_samples)
    probs = [(1 - eta) * eta**l for l in range(max_len + 1)]
    counts = [length_samples.get(l, 0) for l in range(max_len + 1)]
    # pool the geometric tail into the last bin
    probs[-1] += eta ** (max_len + 1)
    while len(counts) > 2 and probs[-1] * n < 5:
        probs[-2] += probs[-1]
        counts[-2] += counts[-1]
        probs.pop()
        counts.pop()
    _, p = stats.chisquare(counts, f_exp=[p * n for p in probs])
    return float(p)
