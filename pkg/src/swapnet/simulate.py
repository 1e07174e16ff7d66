"""Event-driven simulation of the finite mobile-server network.

The network state is a permutation of servers over nodes plus one FIFO
queue per server; queues travel with their servers when neighboring
servers swap. Three exponential clock families drive the dynamics:
exogenous arrivals at every node (destination drawn as a
translation-invariant offset of the arrival node), unit-rate service at
every busy server, and swaps across edges. A served customer exits
within graph distance 1 of its destination and otherwise jumps onto a
uniformly chosen next-hop node. In mean-field mode every base vertex is
replicated N times, transit customers pick a uniformly random replica
of their next-hop vertex, and each pair of neighboring replicas swaps
at rate beta/N (or beta/N^2 under per-edge normalization).

A single run is sequential and fully determined by the config seed;
independent runs can execute concurrently.
"""

from __future__ import annotations

import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field, replace

import numpy as np

from swapnet.topology import GraphTopology, _wrap

__all__ = [
    "CustomerRecord",
    "SimConfig",
    "NetworkState",
    "Trajectory",
    "empty_state",
    "level_state",
    "total_event_rate",
    "simulate",
]


@dataclass(slots=True)
class CustomerRecord:
    """One customer: destination (base-vertex index), arrival time, hops.

    ``tagged`` marks customers observed deep in a queue (at or beyond
    the configured depth threshold) whose next service is recorded;
    ``seq`` is the global append sequence number used for FIFO audits.
    """

    destination: int
    arrival_time: float
    hops_so_far: int = 0
    tagged: bool = False
    seq: int = 0


@dataclass
class SimConfig:
    """Simulation parameters; everything downstream of the seed is exact.

    Attributes
    ----------
    topology : GraphTopology
        Base graph.
    lambda_offsets : dict
        Destination offset -> arrival rate. Offsets are ints on cycles,
        coordinate pairs on tori; general graphs support only offset 0
        (destination equals the arrival node). The per-node arrival rate
        is the sum of the values.
    beta : float
        Swap rate per edge (scaled by replicas in mean-field mode).
    replica_count : int
        N; 1 gives the plain network.
    seed : int
        Event-loop RNG seed; identical configs give identical runs.
    horizon : float or None
        Simulated-time limit.
    max_events : int or None
        Event-count limit; at least one of horizon/max_events required.
    record_interval : float or None
        Spacing of queue-length snapshots along simulated time.
    record_events : bool
        Keep queue-length vectors and times at every event.
    record_event_log : bool
        Keep rows (time, kind, node, server, dest) per event.
    record_customers : bool
        Keep per-customer exit records and the per-server service order.
    deep_threshold : int or None
        Tag customers appended at queue position >= this; their next
        services are counted (and transit targets recorded).
    stop_min_queue : int or None
        Stop early once every queue length exceeds this level.
    record_occupancy : bool
        Accumulate time-weighted queue-length occupancy and transit-type
        counts (cycles only) from ``occupancy_start`` on.
    occupancy_start : float
        Window start for occupancy accumulation.
    swap_normalization : str
        "per_pair" (pairwise rate beta/N, aggregate beta*N per base
        edge) or "per_edge" (aggregate beta per base edge).
    """

    topology: GraphTopology
    lambda_offsets: dict
    beta: float
    replica_count: int = 1
    seed: int = 0
    horizon: float | None = None
    max_events: int | None = None
    record_interval: float | None = None
    record_events: bool = False
    record_event_log: bool = False
    record_customers: bool = False
    deep_threshold: int | None = None
    stop_min_queue: int | None = None
    record_occupancy: bool = False
    occupancy_start: float = 0.0
    swap_normalization: str = "per_pair"

    def __post_init__(self):
        if any(rate < 0 for rate in self.lambda_offsets.values()):
            raise ValueError("arrival rates must be nonnegative")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.replica_count < 1:
            raise ValueError(f"replica_count must be positive, got {self.replica_count}")
        if self.horizon is None and self.max_events is None:
            raise ValueError("set horizon and/or max_events")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.swap_normalization not in ("per_pair", "per_edge"):
            raise ValueError(f"unknown swap normalization {self.swap_normalization!r}")

    @property
    def node_count(self) -> int:
        return self.topology.vertex_count * self.replica_count

    @property
    def lambda_total(self) -> float:
        """Per-node arrival rate."""
        return float(sum(self.lambda_offsets.values()))


@dataclass
class NetworkState:
    """Server placement, per-server FIFO queues, and the clock."""

    server_of_node: list[int]
    node_of_server: list[int]
    queues: list[deque]
    sim_time: float
    replica_count: int


@dataclass(eq=False)
class Trajectory:
    """Everything recorded during one run; heavier fields are opt-in."""

    sample_times: np.ndarray
    queue_lengths: np.ndarray
    event_counts: Counter
    final_state: NetworkState
    stopped_at: float | None = None
    event_times: np.ndarray | None = None
    event_queue_lengths: np.ndarray | None = None
    event_log: list | None = None
    customers: list | None = None
    service_order: list | None = None
    deep_services: int = 0
    deep_exits: int = 0
    transit_targets: list = field(default_factory=list)
    occupancy: dict = field(default_factory=dict)
    occupancy_duration: float = 0.0
    transit_type_counts: dict = field(default_factory=dict)


def empty_state(config: SimConfig) -> NetworkState:
    """All queues empty, server i at node i, clock at zero."""
    n = config.node_count
    return NetworkState(
        server_of_node=list(range(n)),
        node_of_server=list(range(n)),
        queues=[deque() for _ in range(n)],
        sim_time=0.0,
        replica_count=config.replica_count,
    )


def level_state(config: SimConfig, level: int) -> NetworkState:
    """Every queue holds ``level`` customers destined to its own node."""
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    n = config.node_count
    N = config.replica_count
    queues = []
    for node in range(n):
        base = node // N
        queues.append(
            deque(CustomerRecord(destination=base, arrival_time=0.0) for _ in range(level))
        )
    return NetworkState(
        server_of_node=list(range(n)),
        node_of_server=list(range(n)),
        queues=queues,
        sim_time=0.0,
        replica_count=config.replica_count,
    )


def _swap_rate_total(config: SimConfig) -> float:
    edges = len(config.topology.edge_list())
    if config.replica_count == 1 or config.swap_normalization == "per_edge":
        return config.beta * edges
    return config.beta * config.replica_count * edges


def total_event_rate(config: SimConfig, state: NetworkState) -> float:
    """Aggregate exponential rate out of a state: arrivals + busy + swaps."""
    busy = sum(1 for q in state.queues if q)
    return config.lambda_total * config.node_count + busy + _swap_rate_total(config)


def _offset_tables(config: SimConfig):
    """Cumulative offset weights and per-offset destination lookup tables."""
    G = config.topology
    items = sorted(config.lambda_offsets.items(), key=repr)
    offsets, weights = [], []
    for off, rate in items:
        if rate > 0:
            offsets.append(off)
            weights.append(rate)
    tables = []
    for off in offsets:
        if G.kind == "cycle":
            K = G.shape[0]
            tables.append([(v + off) % K for v in range(K)])
        elif G.kind == "torus":
            K, L = G.shape
            da, db = off
            tables.append(
                [
                    G.index[(_wrap(a + da, K), _wrap(b + db, L))]
                    for (a, b) in G.vertices
                ]
            )
        else:
            if off != 0:
                raise ValueError(
                    f"general graphs support only the zero destination offset, got {off!r}"
                )
            tables.append(list(range(G.vertex_count)))
    cum = []
    acc = 0.0
    for w in weights:
        acc += w
        cum.append(acc)
    return tables, cum


def _centered_offset(d: int, v: int, K: int) -> int:
    off = (d - v) % K
    if off > (K - 1) // 2:
        off -= K
    return off


def _check_state(config: SimConfig, state: NetworkState) -> None:
    n = config.node_count
    if state.replica_count != config.replica_count:
        raise ValueError("initial state replica count does not match config")
    if len(state.queues) != n:
        raise ValueError(f"state has {len(state.queues)} queues, config needs {n}")
    if sorted(state.node_of_server) != list(range(n)) or any(
        state.server_of_node[state.node_of_server[s]] != s for s in range(n)
    ):
        raise ValueError("server placement is not a consistent permutation")


def simulate(config: SimConfig, initial: NetworkState | None = None) -> Trajectory:
    """Run the continuous-time chain; see SimConfig for the knobs.

    Events are generated by the total-rate method: one exponential
    holding time at the aggregate rate, then a category draw among
    arrival/service/swap proportional to their rates. This is an exact
    simulation of the Markov chain.
    """
    G = config.topology
    V = G.vertex_count
    N = config.replica_count
    n_nodes = config.node_count
    state = initial if initial is not None else empty_state(config)
    _check_state(config, state)

    rng = random.Random(config.seed)
    node_of_server = list(state.node_of_server)
    server_of_node = list(state.server_of_node)
    queues = [deque(replace(rec) for rec in q) for q in state.queues]
    lengths = [len(q) for q in queues]

    dest_tables, offset_cum = _offset_tables(config)
    lam_rate = config.lambda_total * n_nodes
    edges_idx = [(G.index[u], G.index[w]) for u, w in G.edge_list()]
    n_edges = len(edges_idx)
    swap_total = _swap_rate_total(config)
    hop_idx = G.hop_idx
    dist = G.dist
    is_cycle = G.kind == "cycle"

    # busy-server bookkeeping with O(1) uniform sampling
    busy_list = [s for s in range(n_nodes) if lengths[s]]
    busy_pos = [-1] * n_nodes
    for i, s in enumerate(busy_list):
        busy_pos[s] = i

    deep = config.deep_threshold
    seq_counter = 0
    for q in queues:
        for pos, rec in enumerate(q, start=1):
            rec.seq = seq_counter
            seq_counter += 1
            if deep is not None and pos >= deep:
                rec.tagged = True

    stop_level = config.stop_min_queue
    low_count = sum(1 for h in lengths if h <= stop_level) if stop_level is not None else 0

    counts: Counter = Counter()
    sample_times: list[float] = []
    samples: list[list[int]] = []
    interval = config.record_interval
    next_sample = state.sim_time if interval else None

    event_times: list[float] = []
    flat_lengths: list[int] = []
    event_log: list | None = [] if config.record_event_log else None
    customers: list | None = [] if config.record_customers else None
    service_order: list | None = [] if config.record_customers else None
    deep_services = 0
    deep_exits = 0
    transit_targets: list = []

    occ: dict[int, float] = {}
    type_counts: Counter = Counter()
    len_counts: Counter = Counter(lengths) if config.record_occupancy else Counter()
    occ_start = config.occupancy_start

    t = state.sim_time
    horizon = config.horizon if config.horizon is not None else math.inf
    max_events = config.max_events if config.max_events is not None else None
    events = 0
    stopped_at = None

    def snapshot_until(limit):
        nonlocal next_sample
        while next_sample is not None and next_sample <= limit:
            sample_times.append(next_sample)
            samples.append(lengths.copy())
            next_sample += interval

    while max_events is None or events < max_events:
        busy_n = len(busy_list)
        R = lam_rate + busy_n + swap_total
        if R <= 0:
            break
        t_new = t + rng.expovariate(R)
        if t_new > horizon:
            t_new = horizon
        if interval:
            snapshot_until(min(t_new, horizon))
        if config.record_occupancy:
            lo = max(t, occ_start)
            hi = min(t_new, horizon)
            if hi > lo:
                dt = hi - lo
                for h, cnt in len_counts.items():
                    occ[h] = occ.get(h, 0.0) + dt * cnt
        if t_new >= horizon:
            t = horizon
            break
        t = t_new

        u = rng.random() * R
        if u < lam_rate:
            node = rng.randrange(n_nodes)
            base = node // N
            if len(offset_cum) == 1:
                table = dest_tables[0]
            else:
                x = rng.random() * offset_cum[-1]
                pick = 0
                while offset_cum[pick] <= x:
                    pick += 1
                table = dest_tables[pick]
            dest = table[base]
            server = server_of_node[node]
            rec = CustomerRecord(destination=dest, arrival_time=t, seq=seq_counter)
            seq_counter += 1
            q = queues[server]
            q.append(rec)
            h = lengths[server] = lengths[server] + 1
            if h == 1:
                busy_pos[server] = len(busy_list)
                busy_list.append(server)
            if deep is not None and h >= deep:
                rec.tagged = True
            if config.record_occupancy:
                len_counts[h - 1] -= 1
                len_counts[h] += 1
            if stop_level is not None and h == stop_level + 1:
                low_count -= 1
            counts["arrival"] += 1
            if event_log is not None:
                event_log.append((t, "arrival", node, server, dest))
        elif u < lam_rate + busy_n:
            server = busy_list[rng.randrange(busy_n)]
            node = node_of_server[server]
            base = node // N
            q = queues[server]
            rec = q.popleft()
            h = lengths[server] = lengths[server] - 1
            if h == 0:
                i = busy_pos[server]
                last = busy_list[-1]
                busy_list[i] = last
                busy_pos[last] = i
                busy_list.pop()
                busy_pos[server] = -1
            if config.record_occupancy:
                len_counts[h + 1] -= 1
                len_counts[h] += 1
            if stop_level is not None and h == stop_level:
                low_count += 1
            if service_order is not None:
                service_order.append((server, rec.seq))
            dest = rec.destination
            if dist[base, dest] <= 1:
                counts["service_exit"] += 1
                if rec.tagged:
                    deep_services += 1
                    deep_exits += 1
                if customers is not None:
                    customers.append(
                        (rec.arrival_time, t, rec.hops_so_far, int(dist[base, dest]))
                    )
                if event_log is not None:
                    event_log.append((t, "service_exit", node, server, dest))
            else:
                hops = hop_idx[base][dest]
                w = hops[0] if len(hops) == 1 else hops[rng.randrange(len(hops))]
                target_node = w * N + (rng.randrange(N) if N > 1 else 0)
                target = server_of_node[target_node]
                new_rec = CustomerRecord(
                    destination=dest,
                    arrival_time=rec.arrival_time,
                    hops_so_far=rec.hops_so_far + 1,
                    seq=seq_counter,
                )
                seq_counter += 1
                tq = queues[target]
                tq.append(new_rec)
                th = lengths[target] = lengths[target] + 1
                if th == 1:
                    busy_pos[target] = len(busy_list)
                    busy_list.append(target)
                if deep is not None and th >= deep:
                    new_rec.tagged = True
                if config.record_occupancy:
                    len_counts[th - 1] -= 1
                    len_counts[th] += 1
                    if is_cycle and t >= occ_start:
                        type_counts[_centered_offset(dest, w, V)] += 1
                if stop_level is not None and th == stop_level + 1:
                    low_count -= 1
                if rec.tagged:
                    deep_services += 1
                    transit_targets.append((server, target))
                counts["service_transit"] += 1
                if event_log is not None:
                    event_log.append((t, "service_transit", node, server, dest))
        else:
            eu, ew = edges_idx[rng.randrange(n_edges)]
            if N == 1:
                na, nb = eu, ew
            else:
                na = eu * N + rng.randrange(N)
                nb = ew * N + rng.randrange(N)
            sa, sb = server_of_node[na], server_of_node[nb]
            server_of_node[na], server_of_node[nb] = sb, sa
            node_of_server[sa], node_of_server[sb] = nb, na
            counts["swap"] += 1
            if event_log is not None:
                event_log.append((t, "swap", na, sa, nb))

        events += 1
        if config.record_events:
            event_times.append(t)
            flat_lengths.extend(lengths)
        if stop_level is not None and low_count == 0:
            stopped_at = t
            break

    if interval:
        snapshot_until(min(t, horizon))

    n_servers = n_nodes
    traj = Trajectory(
        sample_times=np.array(sample_times),
        queue_lengths=np.array(samples, dtype=np.int64).reshape(len(samples), n_servers)
        if samples
        else np.zeros((0, n_servers), dtype=np.int64),
        event_counts=counts,
        final_state=NetworkState(
            server_of_node=server_of_node,
            node_of_server=node_of_server,
            queues=queues,
            sim_time=t,
            replica_count=N,
        ),
        stopped_at=stopped_at,
        event_log=event_log,
        customers=customers,
        service_order=service_order,
        deep_services=deep_services,
        deep_exits=deep_exits,
        transit_targets=transit_targets,
        occupancy=occ,
        occupancy_duration=max(0.0, min(t, horizon) - occ_start)
        if config.record_occupancy
        else 0.0,
        transit_type_counts=dict(type_counts),
    )
    if config.record_events:
        traj.event_times = np.array(event_times)
        traj.event_queue_lengths = np.array(flat_lengths, dtype=np.int64).reshape(
            len(event_times), n_servers
        )
    return traj
