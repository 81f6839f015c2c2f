"""Directed-graph storage and the shortest-path kernels used by pricing.

The graph is an immutable compressed adjacency structure (forward and
reverse) built once per instance. Every shortest-path run owns private
scratch labels, so a single :class:`Network` and any
:class:`HeuristicBounds` can be shared freely across concurrent pricing
workers.

Distances use 64-bit floats with ``math.inf`` as the explicit
"unreached" sentinel; the kernels never do arithmetic on the sentinel.
Heap ties are broken by node id so identical inputs always produce
identical shortest-path trees.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InternalError

INF = math.inf


class Network:
    """Immutable directed network with per-edge cost and capacity.

    Parallel edges and self-loops are permitted (real road networks
    contain both); self-loops are never relaxed.

    Attributes:
        node_count: Number of nodes; ids are 0..node_count-1.
        edge_count: Number of edges; ids are 0..edge_count-1.
        tail: Per-edge tail node id (int64 array).
        head: Per-edge head node id (int64 array).
        cost: Per-edge nonnegative cost (float64 array).
        capacity: Per-edge nonnegative capacity (float64 array).
    """

    __slots__ = ("node_count", "edge_count", "tail", "head", "cost", "capacity",
                 "_out_start", "_out_edges", "_in_start", "_in_edges")

    def __init__(self, node_count: int, edges):
        if node_count < 1:
            raise InputError(f"node_count must be positive, got {node_count}")
        edges = list(edges)
        tail = np.array([e[0] for e in edges], dtype=np.int64)
        head = np.array([e[1] for e in edges], dtype=np.int64)
        cost = np.array([e[2] for e in edges], dtype=np.float64)
        capacity = np.array([e[3] for e in edges], dtype=np.float64)
        if edges:
            bad = np.flatnonzero((tail < 0) | (tail >= node_count)
                                 | (head < 0) | (head >= node_count))
            if bad.size:
                e = int(bad[0])
                raise InputError(
                    f"edge {e} endpoint out of range: ({tail[e]}, {head[e]}) "
                    f"with {node_count} nodes")
            if not np.all(np.isfinite(cost)) or np.any(cost < 0):
                raise InputError("edge costs must be finite and nonnegative")
            if np.any(np.isnan(capacity)) or np.any(capacity < 0):
                raise InputError("edge capacities must be nonnegative")
        self.node_count = int(node_count)
        self.edge_count = len(edges)
        self.tail = tail
        self.head = head
        self.cost = cost
        self.capacity = capacity
        self._out_start, self._out_edges = _build_csr(tail, node_count)
        self._in_start, self._in_edges = _build_csr(head, node_count)
        for a in (self.tail, self.head, self.cost, self.capacity,
                  self._out_start, self._out_edges, self._in_start, self._in_edges):
            a.setflags(write=False)

    def out_edges(self, v: int) -> np.ndarray:
        """Edge ids leaving node v, ordered by edge id."""
        return self._out_edges[self._out_start[v]:self._out_start[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        """Edge ids entering node v, ordered by edge id."""
        return self._in_edges[self._in_start[v]:self._in_start[v + 1]]

    def check_node(self, v: int) -> int:
        if not 0 <= v < self.node_count:
            raise InputError(f"node id {v} out of range [0, {self.node_count})")
        return int(v)

    def __repr__(self) -> str:
        return f"Network(nodes={self.node_count}, edges={self.edge_count})"


def _build_csr(node_of_edge: np.ndarray, node_count: int):
    """CSR index: start offsets per node plus edge ids sorted by (node, edge id)."""
    order = np.argsort(node_of_edge, kind="stable").astype(np.int64)
    counts = np.bincount(node_of_edge, minlength=node_count) if node_of_edge.size else \
        np.zeros(node_count, dtype=np.int64)
    start = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return start, order


@dataclass
class SptResult:
    """Labels produced by one shortest-path run.

    Attributes:
        dist: Per-node distance; ``math.inf`` marks unreached nodes.
            For nodes that are not settled the value is a tentative
            upper bound, not a final label.
        parent_edge: Per-node incoming tree edge id, -1 for the source
            and unreached nodes. Parent edges of settled nodes form a
            forest rooted at the source.
        settled: Per-node flag; True exactly for nodes whose label is
            final.
        order: Node ids in settle order (non-decreasing distance; the
            tail of a settled node's parent edge always precedes it).
    """

    dist: np.ndarray
    parent_edge: np.ndarray
    settled: np.ndarray
    order: list[int]


@dataclass(frozen=True)
class HeuristicBounds:
    """Admissible, consistent lower bounds to a fixed destination set.

    ``h[v]`` underestimates the distance from v to the nearest bounded
    destination under the weights the bounds were built for, and stays
    valid for any heavier weight vector.
    """

    h: np.ndarray


def _check_weights(net: Network, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (net.edge_count,):
        raise InputError(f"weight vector has shape {w.shape}, expected ({net.edge_count},)")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("edge weights must be finite and nonnegative")
    return w


def spt_path(net: Network, spt: SptResult, v: int) -> list[int]:
    """Edge ids of the tree path from the run's source to settled node v."""
    if not spt.settled[v]:
        raise InternalError(f"node {v} is not settled; no final path exists")
    edges: list[int] = []
    while spt.parent_edge[v] >= 0:
        e = int(spt.parent_edge[v])
        edges.append(e)
        v = int(net.tail[e])
    edges.reverse()
    return edges


def dijkstra(net: Network, w: np.ndarray, source: int,
             targets=None) -> SptResult:
    """Single-source shortest paths under nonnegative weights.

    Args:
        net: The network.
        w: Per-edge nonnegative weights.
        source: Start node.
        targets: Optional set of node ids; the run may stop as soon as
            all of them are settled.

    Returns:
        Exact distance labels from ``source``; unreached nodes carry inf.
    """
    w = _check_weights(net, w)
    source = net.check_node(source)
    remaining = None
    if targets is not None:
        remaining = {net.check_node(t) for t in targets}

    dist = np.full(net.node_count, INF)
    parent = np.full(net.node_count, -1, dtype=np.int64)
    settled = np.zeros(net.node_count, dtype=bool)
    order: list[int] = []
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    head, tail = net.head, net.tail
    while heap:
        d, v = heapq.heappop(heap)
        if settled[v] or d > dist[v]:
            continue
        assert d < INF, "sentinel distance reached the heap"
        settled[v] = True
        order.append(v)
        if remaining is not None:
            remaining.discard(v)
            if not remaining:
                break
        for e in net.out_edges(v):
            u = head[e]
            if u == v:
                continue
            nd = d + w[e]
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = e
                heapq.heappush(heap, (nd, int(u)))
            elif nd == dist[u] and not settled[u] and 0 <= parent[u] and e < parent[u]:
                parent[u] = e
    return SptResult(dist, parent, settled, order)


def dijkstra_bounded(net: Network, w: np.ndarray, source: int,
                     dest_duals: dict[int, float]) -> SptResult:
    """Dijkstra with the early stop test for single-source pricing.

    The run terminates as soon as the current extract-min key reaches
    ``max(dest_duals.values())``: past that point no destination can be
    settled at a distance below its dual, so no further negative
    classification is possible. Labels of nodes settled before the stop
    are identical to a full run.

    Args:
        dest_duals: Nonempty map destination node -> dual value. A
            destination t is classified negative iff it is settled with
            ``dist[t] < dest_duals[t]``.
    """
    if not dest_duals:
        raise InputError("dest_duals must be nonempty")
    w = _check_weights(net, w)
    source = net.check_node(source)
    remaining = {net.check_node(t) for t in dest_duals}
    stop_key = max(dest_duals.values())

    dist = np.full(net.node_count, INF)
    parent = np.full(net.node_count, -1, dtype=np.int64)
    settled = np.zeros(net.node_count, dtype=bool)
    order: list[int] = []
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    head = net.head
    while heap:
        d, v = heapq.heappop(heap)
        if settled[v] or d > dist[v]:
            continue
        if d >= stop_key:
            break
        assert d < INF, "sentinel distance reached the heap"
        settled[v] = True
        order.append(v)
        remaining.discard(v)
        if not remaining:
            break
        for e in net.out_edges(v):
            u = head[e]
            if u == v:
                continue
            nd = d + w[e]
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = e
                heapq.heappush(heap, (nd, int(u)))
            elif nd == dist[u] and not settled[u] and 0 <= parent[u] and e < parent[u]:
                parent[u] = e
    return SptResult(dist, parent, settled, order)


def astar(net: Network, w: np.ndarray, source: int,
          dest_duals: dict[int, float], bounds: HeuristicBounds) -> SptResult:
    """A* with keys f(v) = g(v) + h(v) and the same stop test as
    :func:`dijkstra_bounded`.

    Requires ``bounds`` admissible and consistent for ``w``; consistency
    is checked during relaxation and a violation raises
    :class:`InternalError` naming the offending edge. With ``h == 0``
    the run is identical to :func:`dijkstra_bounded`. Nodes with
    ``h == inf`` cannot reach any bounded destination and are skipped.
    """
    if not dest_duals:
        raise InputError("dest_duals must be nonempty")
    w = _check_weights(net, w)
    source = net.check_node(source)
    h = np.asarray(bounds.h, dtype=np.float64)
    if h.shape != (net.node_count,):
        raise InputError(f"heuristic has shape {h.shape}, expected ({net.node_count},)")
    remaining = {net.check_node(t) for t in dest_duals}
    stop_key = max(dest_duals.values())

    dist = np.full(net.node_count, INF)
    parent = np.full(net.node_count, -1, dtype=np.int64)
    settled = np.zeros(net.node_count, dtype=bool)
    order: list[int] = []
    heap: list[tuple[float, int]] = []
    if not math.isinf(h[source]):
        dist[source] = 0.0
        heap.append((float(h[source]), source))
    head = net.head
    while heap:
        f, v = heapq.heappop(heap)
        if f >= stop_key:
            break
        if settled[v] or f > dist[v] + h[v]:
            continue
        settled[v] = True
        order.append(v)
        remaining.discard(v)
        if not remaining:
            break
        g = dist[v]
        for e in net.out_edges(v):
            u = head[e]
            if u == v:
                continue
            if math.isinf(h[u]):
                continue
            if h[v] > w[e] + h[u] + 1e-9 * (1.0 + abs(h[v])):
                raise InternalError(
                    f"inconsistent heuristic on edge {e}: "
                    f"h({v})={h[v]!r} > w={w[e]!r} + h({u})={h[u]!r}")
            nd = g + w[e]
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = e
                heapq.heappush(heap, (nd + h[u], int(u)))
            elif nd == dist[u] and not settled[u] and 0 <= parent[u] and e < parent[u]:
                parent[u] = e
    return SptResult(dist, parent, settled, order)


def reverse_multi_target_bounds(net: Network, w: np.ndarray,
                                destinations) -> HeuristicBounds:
    """Lower bounds h(v) = min over destinations t of dist(v, t).

    Computed as one multi-source Dijkstra on the edge-reversed graph.
    The result is admissible and consistent for any pricing run whose
    destination set is a subset of ``destinations``, and stays valid
    for any weight vector pointwise >= ``w``.
    """
    w = _check_weights(net, w)
    dests = sorted({net.check_node(t) for t in destinations})
    if not dests:
        raise InputError("destinations must be nonempty")
    dist = np.full(net.node_count, INF)
    settled = np.zeros(net.node_count, dtype=bool)
    heap: list[tuple[float, int]] = []
    for t in dests:
        dist[t] = 0.0
        heap.append((0.0, t))
    heapq.heapify(heap)
    tail = net.tail
    while heap:
        d, v = heapq.heappop(heap)
        if settled[v] or d > dist[v]:
            continue
        settled[v] = True
        for e in net.in_edges(v):
            u = tail[e]
            if u == v:
                continue
            nd = d + w[e]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, int(u)))
    dist.setflags(write=False)
    return HeuristicBounds(dist)
