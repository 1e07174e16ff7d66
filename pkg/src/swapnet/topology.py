"""Graph topologies for networks of position-swapping servers.

Builds cycles, discrete tori, and general connected graphs, precomputing
shortest-path distances and the greedy next-hop sets used by the routing
rule: a served customer exits when it is within graph distance 1 of its
destination and otherwise jumps to a neighbor strictly closer to it.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = [
    "GraphTopology",
    "build_cycle",
    "build_torus",
    "build_general",
    "petersen",
    "load_edge_list",
    "graph_distance",
    "next_hop_set",
    "exits_on_service",
]


class GraphTopology:
    """Immutable graph with cached distances and next-hop sets.

    Attributes
    ----------
    kind : str
        One of ``"cycle"``, ``"torus"``, ``"general"``.
    shape : tuple[int, ...]
        ``(K,)`` for cycles, ``(K, L)`` for tori, ``()`` otherwise.
    vertices : tuple
        Vertex labels in canonical order: ints for cycles and general
        graphs, centered coordinate pairs ``(a, b)`` for tori.
    adjacency : dict
        Vertex label -> sorted tuple of neighbor labels.
    vertex_count : int
        Number of vertices.
    degree : int
        Uniform degree for regular graphs, maximum degree otherwise.
    is_regular : bool
        True iff every vertex has degree ``degree``.
    index : dict
        Vertex label -> position in ``vertices``.
    dist : numpy.ndarray
        Dense ``|V| x |V|`` shortest-path distance matrix in index space.
    neighbor_idx : tuple[tuple[int, ...], ...]
        Neighbor lists in index space, ordered like ``adjacency``.
    hop_idx : list[list[tuple[int, ...]]]
        ``hop_idx[u][d]`` is the tuple of neighbor indices of ``u`` one
        step closer to ``d``; empty when ``dist[u, d] <= 1``.

    Instances are immutable after construction and safe to share across
    concurrent readers.
    """

    def __init__(self, kind: str, shape: tuple, vertices, adjacency: dict):
        self.kind = kind
        self.shape = tuple(shape)
        self.vertices = tuple(vertices)
        if not self.vertices:
            raise ValueError("graph has no vertices")
        self.vertex_count = len(self.vertices)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.adjacency = {v: tuple(sorted(adjacency.get(v, ()))) for v in self.vertices}
        self._validate()
        degrees = [len(self.adjacency[v]) for v in self.vertices]
        self.degree = max(degrees)
        self.is_regular = min(degrees) == self.degree
        self.neighbor_idx = tuple(
            tuple(self.index[w] for w in self.adjacency[v]) for v in self.vertices
        )
        self.dist = _all_pairs_bfs(self.neighbor_idx)
        if (self.dist < 0).any():
            raise ValueError(f"graph is disconnected ({self.vertex_count} vertices)")
        self.hop_idx = _next_hop_table(self.neighbor_idx, self.dist)

    def _validate(self) -> None:
        for v, nbrs in self.adjacency.items():
            if len(set(nbrs)) != len(nbrs):
                raise ValueError(f"duplicate neighbor entries at vertex {v!r}")
            for w in nbrs:
                if w == v:
                    raise ValueError(f"self-loop at vertex {v!r}")
                if w not in self.index:
                    raise ValueError(f"vertex {v!r} lists unknown neighbor {w!r}")
                if v not in self.adjacency[w]:
                    raise ValueError(
                        f"adjacency is not symmetric: {v!r} lists {w!r} "
                        f"but {w!r} does not list {v!r}"
                    )

    def edge_list(self) -> list[tuple]:
        """Undirected edges as (u, v) label pairs with index(u) < index(v)."""
        edges = []
        for u in self.vertices:
            ui = self.index[u]
            for w in self.adjacency[u]:
                if ui < self.index[w]:
                    edges.append((u, w))
        return edges

    def __repr__(self) -> str:
        tag = self.kind
        if self.shape:
            tag += "(" + ",".join(str(s) for s in self.shape) + ")"
        return (
            f"GraphTopology({tag}, |V|={self.vertex_count}, "
            f"g={self.degree}, regular={self.is_regular})"
        )


def _all_pairs_bfs(neighbor_idx) -> np.ndarray:
    n = len(neighbor_idx)
    dist = np.full((n, n), -1, dtype=np.int32)
    for s in range(n):
        row = dist[s]
        row[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            du = row[u]
            for w in neighbor_idx[u]:
                if row[w] < 0:
                    row[w] = du + 1
                    queue.append(w)
    return dist


def _next_hop_table(neighbor_idx, dist):
    n = len(neighbor_idx)
    table = []
    for u in range(n):
        row = []
        for d in range(n):
            if dist[u, d] <= 1:
                row.append(())
            else:
                target = dist[u, d] - 1
                row.append(tuple(w for w in neighbor_idx[u] if dist[w, d] == target))
        table.append(row)
    return table


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_cycle(K: int) -> GraphTopology:
    """Cycle on vertices 0..K-1 with edges between consecutive vertices mod K.

    K must be odd (and >= 3) so that the greedy next hop toward any
    destination more than one step away is unique.
    """
    if K < 3 or K % 2 == 0:
        raise ValueError(f"cycle size K must be odd and >= 3, got {K}")
    adj = {v: ((v - 1) % K, (v + 1) % K) for v in range(K)}
    return GraphTopology("cycle", (K,), range(K), adj)


def build_torus(K: int, L: int) -> GraphTopology:
    """K x L discrete torus with centered coordinates and 4-regular adjacency.

    Vertices are pairs (a, b) with a in {-(K-1)/2 .. (K-1)/2} and b in
    {-(L-1)/2 .. (L-1)/2}; both dimensions must be odd and >= 3.
    """
    if K < 3 or K % 2 == 0 or L < 3 or L % 2 == 0:
        raise ValueError(f"torus dimensions must be odd and >= 3, got K={K}, L={L}")
    vertices = [(a, b) for a in _centered_range(K) for b in _centered_range(L)]
    adj = {
        (a, b): (
            (_wrap(a - 1, K), b),
            (_wrap(a + 1, K), b),
            (a, _wrap(b - 1, L)),
            (a, _wrap(b + 1, L)),
        )
        for (a, b) in vertices
    }
    return GraphTopology("torus", (K, L), vertices, adj)


def build_general(adjacency: dict) -> GraphTopology:
    """Graph from an explicit adjacency mapping vertex -> iterable of neighbors.

    The mapping must be symmetric, loop-free, and connected; vertices that
    appear only in neighbor lists (without their own entry) fail the
    symmetry check. Labels must be mutually sortable.
    """
    verts = set(adjacency)
    for nbrs in adjacency.values():
        verts.update(nbrs)
    return GraphTopology("general", (), sorted(verts), dict(adjacency))


def petersen() -> GraphTopology:
    """The Petersen graph: 10 vertices, 3-regular, diameter 2."""
    adj = {}
    for i in range(5):
        adj[i] = ((i - 1) % 5, (i + 1) % 5, i + 5)
        adj[i + 5] = (5 + (i - 2) % 5, 5 + (i + 2) % 5, i)
    return GraphTopology("general", (), range(10), adj)


def load_edge_list(path) -> GraphTopology:
    """Load a general graph from a text file with one "u v" edge per line.

    Vertex ids are 0-based integers; blank lines and lines starting with
    '#' are skipped. Edges are undirected; duplicates collapse.
    """
    adj: dict[int, set] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            u, v = int(parts[0]), int(parts[1])
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
    if not adj:
        raise ValueError(f"{path}: no edges found")
    return build_general(adj)


# ---------------------------------------------------------------------------
# routing predicates
# ---------------------------------------------------------------------------

def graph_distance(G: GraphTopology, u, v) -> int:
    """Length of the shortest path between vertices u and v."""
    return int(G.dist[G.index[u], G.index[v]])


def next_hop_set(G: GraphTopology, u, dest) -> set:
    """Neighbors of u exactly one step closer to dest.

    Defined only when graph_distance(u, dest) > 1; a customer served
    within distance 1 of its destination exits instead of hopping. On odd
    cycles the set is always a singleton; on tori it has 1 or 2 elements
    and the router tie-breaks uniformly.
    """
    ui, di = G.index[u], G.index[dest]
    if G.dist[ui, di] <= 1:
        raise ValueError(
            f"next hop undefined: {u!r} is within distance 1 of destination {dest!r}"
        )
    return {G.vertices[w] for w in G.hop_idx[ui][di]}


def exits_on_service(G: GraphTopology, u, dest) -> bool:
    """True iff a customer served at u with destination dest leaves the network."""
    return bool(G.dist[G.index[u], G.index[dest]] <= 1)


def _centered_range(n: int) -> range:
    half = (n - 1) // 2
    return range(-half, half + 1)


def _wrap(x: int, n: int) -> int:
    half = (n - 1) // 2
    return (x + half) % n - half
