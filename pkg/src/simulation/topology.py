"""Connectivity graphs and MST/LET data-gathering trees rooted at the sink."""

import math
from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from src.core.logging import get_logger

logger = get_logger(__name__)

SpanningTree = nx.Graph


@dataclass(slots=True)
class ConnectivityGraph:
    """
    Undirected unit-disk graph over all nodes.

    Edges carry `weight` (Euclidean distance, m) and `let` (predicted link
    expiration time, s, possibly inf). Nodes are inserted 0..n-1 and edges in
    lexicographic (min_id, max_id) order, so networkx edge iteration (and hence
    Kruskal's stable sort) breaks ties by that order.
    """

    graph: nx.Graph
    trans_range: float

    @property
    def num_nodes(self) -> int:
        return self.graph.number_of_nodes()

    def edge_set(self) -> set[tuple[int, int]]:
        return {(min(u, v), max(u, v)) for u, v in self.graph.edges()}

    def is_connected(self) -> bool:
        return self.num_nodes > 0 and nx.is_connected(self.graph)


@dataclass(slots=True)
class DGTree:
    """Rooted data-gathering tree; data flows from the leaves to the root (sink)."""

    root: int
    parent: dict[int, int]
    children: dict[int, list[int]]
    level: dict[int, int]
    build_round: int = 0
    bfs_order: list[int] = field(default_factory=list)

    @property
    def nodes(self) -> list[int]:
        return self.bfs_order

    @property
    def leaves(self) -> list[int]:
        return [n for n in self.bfs_order if not self.children[n]]

    @property
    def intermediates(self) -> list[int]:
        return [n for n in self.bfs_order if self.children[n]]

    @property
    def height(self) -> int:
        return max(self.level.values(), default=0)

    def edges(self) -> Iterator[tuple[int, int]]:
        """(parent, child) pairs in BFS order."""
        for node in self.bfs_order:
            for child in self.children[node]:
                yield node, child

    def path_to_root(self, node: int) -> list[int]:
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path


def distance_matrix(positions: np.ndarray) -> np.ndarray:
    """All-pairs Euclidean distances for an (n, 2) position array."""
    deltas = positions[:, np.newaxis, :] - positions[np.newaxis, :, :]
    return np.sqrt((deltas**2).sum(axis=-1))


def let_weight(
    pos_a: tuple[float, float],
    pos_b: tuple[float, float],
    vel_a: tuple[float, float],
    vel_b: tuple[float, float],
    trans_range: float,
) -> float:
    """
    Link expiration time under straight-line constant-velocity motion.

    With relative motion a = vxa - vxb, c = vya - vyb, b = xa - xb, d = ya - yb:
    LET = (-(ab + cd) + sqrt((a^2 + c^2) r^2 - (ad - bc)^2)) / (a^2 + c^2).

    Returns:
        Seconds until the distance first exceeds trans_range; inf for zero relative velocity
    """
    a = vel_a[0] - vel_b[0]
    c = vel_a[1] - vel_b[1]
    b = pos_a[0] - pos_b[0]
    d = pos_a[1] - pos_b[1]
    speed_sq = a * a + c * c
    if speed_sq == 0.0:
        return math.inf
    discriminant = speed_sq * trans_range * trans_range - (a * d - b * c) ** 2
    # only negative through rounding when the pair sits exactly on the range boundary
    root = math.sqrt(max(discriminant, 0.0))
    return max((-(a * b + c * d) + root) / speed_sq, 0.0)


def build_graph(
    positions: np.ndarray,
    trans_range: float,
    velocities: np.ndarray | None = None,
) -> ConnectivityGraph:
    """
    Build the connectivity graph for the current round.

    Args:
        positions: (n, 2) node positions
        trans_range: Transmission range (m); distance == range is an edge
        velocities: (n, 2) velocity vectors; zero velocities when omitted

    Returns:
        ConnectivityGraph with distance and LET attributes per edge
    """
    n = len(positions)
    if velocities is None:
        velocities = np.zeros_like(positions)
    distances = distance_matrix(positions)

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    rows, cols = np.nonzero(np.triu(distances <= trans_range, k=1))
    for u, v in zip(rows.tolist(), cols.tolist(), strict=True):
        let = let_weight(
            (positions[u, 0], positions[u, 1]),
            (positions[v, 0], positions[v, 1]),
            (velocities[u, 0], velocities[u, 1]),
            (velocities[v, 0], velocities[v, 1]),
            trans_range,
        )
        graph.add_edge(u, v, weight=float(distances[u, v]), let=let, neg_let=-let)
    return ConnectivityGraph(graph=graph, trans_range=trans_range)


def mst_tree(graph: ConnectivityGraph) -> SpanningTree | None:
    """Minimum total-distance spanning tree, or None when the graph is disconnected."""
    if not graph.is_connected():
        return None
    return nx.minimum_spanning_tree(graph.graph, weight="weight", algorithm="kruskal")


def let_tree(graph: ConnectivityGraph, objective: str = "total") -> SpanningTree | None:
    """
    Stability-oriented spanning tree, or None when the graph is disconnected.

    objective="total" maximizes total LET (Kruskal under weight -LET; infinite-LET
    edges sort first). objective="bottleneck" keeps only edges whose LET reaches the
    best attainable minimum link lifetime and returns the minimum-distance tree
    among them.
    """
    if not graph.is_connected():
        return None
    tree = nx.minimum_spanning_tree(graph.graph, weight="neg_let", algorithm="kruskal")
    if objective == "total":
        return tree
    if objective != "bottleneck":
        raise ValueError(f"Unknown LET objective: {objective}")

    bottleneck = min((d["let"] for _, _, d in tree.edges(data=True)), default=math.inf)
    stable = nx.Graph()
    stable.add_nodes_from(graph.graph.nodes)
    stable.add_edges_from(
        (u, v, d) for u, v, d in graph.graph.edges(data=True) if d["let"] >= bottleneck
    )
    return nx.minimum_spanning_tree(stable, weight="weight", algorithm="kruskal")


def root_tree(tree: SpanningTree, sink: int, build_round: int = 0) -> DGTree:
    """
    Direct a spanning tree away from the sink by breadth-first search.

    Children are visited in ascending node id so the result is deterministic.
    """
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {sink: []}
    level = {sink: 0}
    order = [sink]
    queue = deque([sink])
    while queue:
        node = queue.popleft()
        for neighbor in sorted(tree.adj[node]):
            if neighbor in level:
                continue
            parent[neighbor] = node
            level[neighbor] = level[node] + 1
            children[node].append(neighbor)
            children[neighbor] = []
            order.append(neighbor)
            queue.append(neighbor)
    return DGTree(
        root=sink,
        parent=parent,
        children=children,
        level=level,
        build_round=build_round,
        bfs_order=order,
    )


def tree_alive(tree: DGTree, positions: np.ndarray, trans_range: float) -> bool:
    """True iff every parent-child pair is still within transmission range."""
    if not tree.parent:
        return True
    children = np.fromiter(tree.parent.keys(), dtype=np.intp)
    parents = np.fromiter(tree.parent.values(), dtype=np.intp)
    deltas = positions[children] - positions[parents]
    return bool(np.all(np.hypot(deltas[:, 0], deltas[:, 1]) <= trans_range))


def build_dg_tree(
    graph: ConnectivityGraph,
    tree_type: str,
    sink: int,
    build_round: int,
    let_objective: str = "total",
) -> DGTree | None:
    """Build and root the configured spanning tree; None when disconnected."""
    if tree_type == "MST":
        spanning = mst_tree(graph)
    elif tree_type == "LET":
        spanning = let_tree(graph, objective=let_objective)
    else:
        raise ValueError(f"Unknown tree type: {tree_type}")
    if spanning is None:
        logger.debug("Connectivity graph disconnected", round=build_round, tree_type=tree_type)
        return None
    return root_tree(spanning, sink, build_round=build_round)
