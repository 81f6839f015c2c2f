"""Column pricing: shortest paths per source group and shortest-path trees.

One shortest-path run from a group's source classifies every member
commodity at once; tree pricing additionally accumulates the member
demands along the tree to obtain the edge flow coefficients. Reduced
costs use the dual-adjusted weights ``cost - mu`` which are nonnegative
by the master's dual normalization, so plain Dijkstra applies. The
``bounded`` and ``astar`` strategies stop a run as soon as no remaining
destination can price out.

Pricing is embarrassingly parallel across groups: everything read here
(network, bounds, dual snapshot) is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InputError, InternalError
from .graph import (HeuristicBounds, Network, SptResult, astar, dijkstra,
                    dijkstra_bounded, spt_path)
from .instance import Instance, SourceGroup
from .master import PATH, TREE, Column


@dataclass(frozen=True)
class DualSnapshot:
    """Immutable dual values handed from the master to pricing.

    ``pi`` maps the demand-row owner (commodity id in path mode, source
    id in tree mode) to its dual; ``mu`` is the per-edge capacity dual,
    zero for inactive rows and nonpositive everywhere.
    """

    pi: dict[int, float]
    mu: np.ndarray


@dataclass
class PricingStats:
    runs: int = 0
    settled: int = 0
    early_stops: int = 0

    def merge(self, other: "PricingStats") -> None:
        self.runs += other.runs
        self.settled += other.settled
        self.early_stops += other.early_stops


@dataclass
class PricingOutcome:
    """Result of pricing one or more owners.

    ``min_reduced_cost`` maps each priced owner to its most negative
    reduced cost clamped at zero (zero therefore means "proven
    nonnegative"); owners skipped by a filter or an early exit map to
    None ("unknown").
    """

    columns: list[Column] = field(default_factory=list)
    min_reduced_cost: dict[int, float | None] = field(default_factory=dict)
    stats: PricingStats = field(default_factory=PricingStats)
    unreachable: list[int] = field(default_factory=list)


def adjusted_weights(net: Network, mu: np.ndarray) -> np.ndarray:
    """Pricing weights ``cost - mu``; nonnegative when mu <= 0."""
    w = net.cost - mu
    if np.any(w < 0):
        raise InputError("capacity duals must be nonpositive")
    return w


def extract_path_column(instance: Instance, spt: SptResult, k: int) -> Column:
    """Build the path column for commodity k from a settled tree."""
    net = instance.network
    com = instance.commodities[k]
    edges = tuple(spt_path(net, spt, com.sink))
    cost = float(sum(net.cost[e] for e in edges))
    return Column(owner=k, kind=PATH, edges=edges,
                  coefs=(1.0,) * len(edges), cost=cost)


def compute_tree_flows(net: Network, spt: SptResult,
                       sink_demands: dict[int, float]) -> dict[int, float]:
    """Accumulate sink demands along parent chains.

    Returns the demand-weighted flow per tree edge. Every sink must be
    settled; processing follows reverse settle order, which is a valid
    topological order of the shortest-path tree.
    """
    for t in sink_demands:
        if not spt.settled[t]:
            raise InternalError(f"sink {t} is not settled; cannot accumulate flows")
    relevant: set[int] = set()
    for t in sink_demands:
        v = t
        while v not in relevant and spt.parent_edge[v] >= 0:
            relevant.add(v)
            v = int(net.tail[spt.parent_edge[v]])
    pos = {v: i for i, v in enumerate(spt.order)}
    acc = {v: 0.0 for v in relevant}
    for t, d in sink_demands.items():
        acc[t] += d
    flows: dict[int, float] = {}
    for v in sorted(relevant, key=pos.__getitem__, reverse=True):
        e = int(spt.parent_edge[v])
        flows[e] = flows.get(e, 0.0) + acc[v]
        u = int(net.tail[e])
        if u in acc:
            acc[u] += acc[v]
    return flows


def build_tree_column(instance: Instance, group: SourceGroup,
                      spt: SptResult) -> Column:
    """Assemble the tree column for a group from a settled tree."""
    net = instance.network
    flows = compute_tree_flows(net, spt, group.sink_demands)
    edges = tuple(sorted(flows))
    coefs = tuple(flows[e] for e in edges)
    cost = float(sum(f * net.cost[e] for e, f in zip(edges, coefs)))
    return Column(owner=group.source, kind=TREE, edges=edges, coefs=coefs,
                  cost=cost)


def price_paths(instance: Instance, group: SourceGroup, duals: DualSnapshot,
                strategy: str = "full", bounds: HeuristicBounds | None = None,
                tolerance: float = 0.0, weights: np.ndarray | None = None,
                members=None) -> PricingOutcome:
    """Price the path columns of one source group.

    A single shortest-path run classifies every selected member: the
    commodity's reduced cost is ``dist[sink] - pi`` and its shortest
    path is emitted when that is below ``-tolerance``. The ``bounded``
    and ``astar`` strategies may stop before settling every sink, but
    any sink left unsettled is then proven to have no negative path, so
    the clamped reduced-cost map stays exact.

    Args:
        members: Optional iterable restricting which member commodities
            to price (the master-easy filter); others are not reported.
    """
    net = instance.network
    w = adjusted_weights(net, duals.mu) if weights is None else weights
    selected = list(group.members) if members is None else \
        [k for k in group.members if k in set(members)]
    if not selected:
        return PricingOutcome()
    dest_duals: dict[int, float] = {}
    for k in selected:
        t = instance.commodities[k].sink
        pi_k = duals.pi[k]
        dest_duals[t] = max(dest_duals.get(t, -np.inf), pi_k)

    if strategy == "full":
        spt = dijkstra(net, w, group.source, targets=dest_duals.keys())
    elif strategy == "bounded":
        spt = dijkstra_bounded(net, w, group.source, dest_duals)
    elif strategy == "astar":
        if bounds is None:
            raise InputError("astar pricing requires heuristic bounds")
        spt = astar(net, w, group.source, dest_duals, bounds)
    else:
        raise InputError(f"unknown pricing strategy {strategy!r}")

    out = PricingOutcome()
    out.stats.runs = 1
    out.stats.settled = len(spt.order)
    for k in selected:
        t = instance.commodities[k].sink
        if spt.settled[t]:
            rc = float(spt.dist[t]) - duals.pi[k]
            if rc < -tolerance:
                out.columns.append(extract_path_column(instance, spt, k))
            out.min_reduced_cost[k] = min(rc, 0.0)
        else:
            # Unsettled under the stop test (or unreachable): no path of
            # negative reduced cost exists for this commodity.
            out.min_reduced_cost[k] = 0.0
            if strategy == "full":
                out.unreachable.append(k)
            else:
                out.stats.early_stops = 1
    return out


def price_tree(instance: Instance, group: SourceGroup, duals: DualSnapshot,
               tolerance: float = 0.0,
               weights: np.ndarray | None = None) -> PricingOutcome:
    """Price the tree column of one source group.

    The shortest-path tree under the adjusted weights minimizes every
    member path simultaneously, so it minimizes the demand-weighted
    reduced cost over all trees covering the group's sinks; the
    reported minimum is therefore exact.
    """
    net = instance.network
    w = adjusted_weights(net, duals.mu) if weights is None else weights
    spt = dijkstra(net, w, group.source, targets=group.sink_demands.keys())
    missing = [t for t in group.sink_demands if not spt.settled[t]]
    out = PricingOutcome()
    out.stats.runs = 1
    out.stats.settled = len(spt.order)
    if missing:
        raise InfeasibleError(
            f"sinks {missing} unreachable from source {group.source}",
            owners=tuple(missing))
    col = build_tree_column(instance, group, spt)
    reduced = float(sum(c * w[e] for e, c in zip(col.edges, col.coefs))) \
        - duals.pi[group.source]
    if reduced < -tolerance:
        out.columns.append(col)
    out.min_reduced_cost[group.source] = min(reduced, 0.0)
    return out


def lagrangian_bound(rmp_objective: float,
                     min_reduced_costs: dict[int, float | None],
                     owner_weights: dict[int, float]) -> float | None:
    """Valid lower bound from a complete pricing round.

    Lowering each demand dual by its owner's most negative reduced cost
    makes the master duals feasible for the full problem, which shifts
    the dual objective by the weighted reduced costs. Returns None when
    any owner's minimum is unknown.
    """
    total = 0.0
    for owner, weight in owner_weights.items():
        rc = min_reduced_costs.get(owner)
        if rc is None:
            return None
        total += weight * min(0.0, rc)
    return rmp_objective + total


def initial_columns(instance: Instance, mode: str) -> list[Column]:
    """One pure shortest-path (or tree) column per pricing problem.

    Runs zero-dual pricing under the original costs and emits every
    column regardless of sign; this seeds the master so the demand rows
    are satisfiable without artificial help. Raises
    :class:`InfeasibleError` naming the commodities whose sink is
    unreachable from its source.
    """
    net = instance.network
    cols: list[Column] = []
    unreachable: list[int] = []
    for group in instance.groups:
        targets = set(group.sink_demands)
        spt = dijkstra(net, net.cost, group.source, targets=targets)
        missing = [t for t in targets if not spt.settled[t]]
        if missing:
            unreachable.extend(k for k in group.members
                               if instance.commodities[k].sink in missing)
            continue
        if mode == TREE:
            cols.append(build_tree_column(instance, group, spt))
        elif mode == PATH:
            for k in group.members:
                cols.append(extract_path_column(instance, spt, k))
        else:
            raise InputError(f"unknown mode {mode!r}")
    if unreachable:
        raise InfeasibleError(
            f"{len(unreachable)} commodities have unreachable sinks: "
            f"{sorted(unreachable)[:10]}", owners=tuple(sorted(unreachable)))
    return cols
