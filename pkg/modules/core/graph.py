"""
Graph model, generators, edge-list serialization and brute-force oracles.

NetworkGraph is an immutable view over an undirected, simple, connected
graph whose node ids are 0..n-1. The networkx graph it wraps is the ground
truth every protocol output is checked against.
"""

import logging
import math
import random
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx

from .constants import BALANCED_TREE_ARITY, GRAPH_FAMILIES, RANDOM_EXTRA_EDGE_FACTOR
from .errors import GraphError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

INF = math.inf


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class NetworkGraph:
    """Undirected simple graph with optional distinct positive integer edge weights."""

    def __init__(self, n: int, edges: Iterable[Edge], weights: Optional[Dict[Edge, int]] = None,
                 require_connected: bool = True):
        if n < 1:
            raise GraphError("a graph needs at least one node")
        adj: List[Set[int]] = [set() for _ in range(n)]
        seen: Set[Edge] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            key = edge_key(u, v)
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
            adj[u].add(v)
            adj[v].add(u)
        self.n = n
        self.adjacency: Tuple[Tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)
        self._edges: Tuple[Edge, ...] = tuple(sorted(seen))
        self.weights: Optional[Dict[Edge, int]] = None
        if weights is not None:
            normalized = {edge_key(u, v): int(w) for (u, v), w in weights.items()}
            if set(normalized) != seen:
                raise GraphError("weights must be given for exactly the graph's edges")
            if any(w <= 0 for w in normalized.values()):
                raise GraphError("edge weights must be positive")
            if len(set(normalized.values())) != len(normalized):
                raise GraphError("edge weights must be distinct")
            self.weights = normalized
        if require_connected and not nx.is_connected(self.nx_graph):
            raise GraphError("graph is not connected")

    # ------------------------------------------------------------------
    # Accessors
    # ------------------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def is_weighted(self) -> bool:
        return self.weights is not None

    def nodes(self) -> range:
        return range(self.n)

    def edges(self) -> Tuple[Edge, ...]:
        return self._edges

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.nx_graph[u] if 0 <= u < self.n else False

    def weight(self, u: int, v: int) -> int:
        if self.weights is None:
            raise GraphError("graph is unweighted")
        return self.weights[edge_key(u, v)]

    @cached_property
    def nx_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        if self.weights is None:
            g.add_edges_from(self._edges)
        else:
            g.add_weighted_edges_from((u, v, self.weights[(u, v)]) for u, v in self._edges)
        return g

    def __eq__(self, other) -> bool:
        return (isinstance(other, NetworkGraph) and self.n == other.n
                and self._edges == other._edges and self.weights == other.weights)

    def __hash__(self) -> int:
        return hash((self.n, self._edges))

    def __repr__(self) -> str:
        kind = 'weighted' if self.is_weighted else 'unweighted'
        return f"NetworkGraph(n={self.n}, m={self.m}, {kind})"


# ----------------------------------------------------------------------
# Generation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GraphSpec:
    """family:n:seed[:weighted]"""
    family: str
    n: int
    seed: int = 0
    weighted: bool = False

    def __str__(self) -> str:
        return f"{self.family}:{self.n}:{self.seed}" + (":weighted" if self.weighted else "")


def parse_graph_spec(text: str) -> GraphSpec:
    """Parse the CLI form `family:n:seed[:weighted]`."""
    parts = text.strip().split(':')
    if len(parts) < 2 or len(parts) > 4:
        raise GraphError(f"graph spec {text!r} must look like family:n:seed[:weighted]")
    family = parts[0]
    if family not in GRAPH_FAMILIES:
        raise GraphError(f"unsupported graph family {family!r}; choose from {', '.join(GRAPH_FAMILIES)}")
    try:
        n = int(parts[1])
        seed = int(parts[2]) if len(parts) >= 3 and parts[2] != '' else 0
    except ValueError as e:
        raise GraphError(f"graph spec {text!r}: n and seed must be integers") from e
    weighted = False
    if len(parts) == 4:
        if parts[3] not in ('weighted', 'w', 'unweighted'):
            raise GraphError(f"graph spec {text!r}: fourth field must be 'weighted'")
        weighted = parts[3] != 'unweighted'
    if n < 1:
        raise GraphError("graph spec needs n >= 1")
    return GraphSpec(family, n, seed, weighted)


def _grid(n: int) -> nx.Graph:
    rows = max(1, math.isqrt(n))
    cols = math.ceil(n / rows)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    for i in range(n):
        r, c = divmod(i, cols)
        if c + 1 < cols and i + 1 < n:
            g.add_edge(i, i + 1)
        if i + cols < n:
            g.add_edge(i, i + cols)
    return g


def _random_connected(n: int, rng: random.Random) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        g.add_edge(order[i], order[rng.randrange(i)])
    max_edges = n * (n - 1) // 2
    extra = min(int(RANDOM_EXTRA_EDGE_FACTOR * n), max_edges - g.number_of_edges())
    while extra > 0:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v and not g.has_edge(u, v):
            g.add_edge(u, v)
            extra -= 1
    return g


def generate(spec: GraphSpec) -> NetworkGraph:
    """Deterministic generator: the same spec always yields the same graph."""
    n = spec.n
    if n < 1:
        raise GraphError("graph spec needs n >= 1")
    rng = random.Random(spec.seed)
    family = spec.family
    if family == 'path':
        g = nx.path_graph(n)
    elif family == 'cycle':
        g = nx.cycle_graph(n) if n >= 3 else nx.path_graph(n)
    elif family == 'grid':
        g = _grid(n)
    elif family == 'random-connected':
        g = _random_connected(n, rng)
    elif family == 'balanced-tree':
        g = nx.full_rary_tree(BALANCED_TREE_ARITY, n)
    elif family == 'complete':
        g = nx.complete_graph(n)
    elif family == 'star':
        g = nx.star_graph(n - 1)
    else:
        raise GraphError(f"unsupported graph family {family!r}")

    edges = sorted(edge_key(u, v) for u, v in g.edges())
    weights = None
    if spec.weighted:
        # a random permutation of 1..m makes weights distinct, so the MST is unique
        ranks = list(range(1, len(edges) + 1))
        rng.shuffle(ranks)
        weights = dict(zip(edges, ranks))
    return NetworkGraph(n, edges, weights)


# ----------------------------------------------------------------------
# Edge-list I/O
# ----------------------------------------------------------------------

def format_edge_list(g: NetworkGraph) -> str:
    """Header `n m weighted|unweighted`, then one `u v [w]` line per edge."""
    lines = [f"{g.n} {g.m} {'weighted' if g.is_weighted else 'unweighted'}"]
    for u, v in g.edges():
        lines.append(f"{u} {v} {g.weights[(u, v)]}" if g.is_weighted else f"{u} {v}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> NetworkGraph:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith('#')]
    if not rows:
        raise GraphError("empty edge list")
    header = rows[0]
    if len(header) != 3:
        raise GraphError("edge-list header must be `n m weighted|unweighted`")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as e:
        raise GraphError("edge-list header must start with two integers") from e
    weighted = header[2].lower() in ('weighted', '1', 'true', 'yes')
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"edge-list header announces {m} edges but {len(body)} follow")
    edges, weights = [], {}
    for row in body:
        if len(row) != (3 if weighted else 2):
            raise GraphError(f"malformed edge line {' '.join(row)!r}")
        try:
            u, v = int(row[0]), int(row[1])
        except ValueError as e:
            raise GraphError(f"malformed edge line {' '.join(row)!r}") from e
        edges.append((u, v))
        if weighted:
            weights[edge_key(u, v)] = int(row[2])
    return NetworkGraph(n, edges, weights if weighted else None)


def write_edge_list(g: NetworkGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(format_edge_list(g), encoding='utf-8')


def read_edge_list(path: Union[str, Path]) -> NetworkGraph:
    return parse_edge_list(Path(path).read_text(encoding='utf-8'))


def load_graph(text: str) -> NetworkGraph:
    """Accept either a graph spec string or a path to an edge-list file."""
    if Path(text).is_file():
        return read_edge_list(text)
    return generate(parse_graph_spec(text))


# ----------------------------------------------------------------------
# Oracles
# ----------------------------------------------------------------------

def bfs_oracle(g: NetworkGraph, sources: Iterable[int],
               within: Optional[Iterable[int]] = None) -> Tuple[Dict[int, float], int]:
    """Exact hop distance dist(v, S) for every node, plus D1 = max finite distance.

    `within` restricts the search to an induced subgraph; nodes outside it
    (and unreachable nodes) get INF.
    """
    sources = set(sources)
    if not sources:
        raise GraphError("bfs_oracle needs a nonempty source set")
    if any(not 0 <= s < g.n for s in sources):
        raise GraphError("sources must be nodes of the graph")
    graph = g.nx_graph if within is None else g.nx_graph.subgraph(set(within))
    start = sources & set(graph.nodes)
    lengths = nx.multi_source_dijkstra_path_length(graph, start, weight=lambda u, v, d: 1) if start else {}
    dist = {v: lengths.get(v, INF) for v in range(g.n)}
    finite = [d for d in dist.values() if d != INF]
    return dist, int(max(finite)) if finite else 0


def mst_oracle(g: NetworkGraph) -> Tuple[FrozenSet[Edge], int]:
    """The unique minimum spanning tree (weights are distinct) and its total weight."""
    if not g.is_weighted:
        raise GraphError("mst_oracle needs a weighted graph")
    tree = nx.minimum_spanning_tree(g.nx_graph, weight='weight', algorithm='kruskal')
    edges = frozenset(edge_key(u, v) for u, v in tree.edges())
    return edges, sum(g.weights[e] for e in edges)


def diameter(g: NetworkGraph) -> int:
    """Exact diameter via all-pairs BFS."""
    return nx.diameter(g.nx_graph) if g.n > 1 else 0


def triangle_consistent(g: NetworkGraph, dist: Dict[int, float]) -> bool:
    """|dist(u) - dist(v)| <= 1 on every edge between reached nodes."""
    for u, v in g.edges():
        if dist[u] != INF and dist[v] != INF and abs(dist[u] - dist[v]) > 1:
            return False
    return True


def random_spanning_tree_weight(g: NetworkGraph, rng: random.Random) -> int:
    """Weight of a uniformly random spanning tree; used to test MST minimality."""
    tree = nx.random_spanning_tree(g.nx_graph, weight=None, seed=rng.randrange(2 ** 32))
    return sum(g.weights[edge_key(u, v)] for u, v in tree.edges())
