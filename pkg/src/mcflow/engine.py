"""Column generation engine: alternate master solves, lazy capacity row
separation, and pricing until the relative gap closes.

Two balancing strategies are available. ``master-easy`` re-optimizes
the master whenever violated capacity rows exist before any pricing,
and prices only owners whose pooled columns touch newly added rows
(dropping that filter once it yields too little). ``pricing-easy``
attempts row separation and pricing in every iteration, stopping a
pricing sweep after a configured number of negative columns; whenever a
sweep covers every owner the Lagrangian bound is refreshed. ``auto``
picks pricing-easy when the instance has more commodities than nodes.

Direct solves of the edge-based and source-based LPs are routed through
the same entry point for convenience.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baseline import EDGE_LP, SOURCE_LP, build_edge_lp, build_source_lp, solve_direct
from .errors import InfeasibleError, InputError
from .graph import HeuristicBounds, reverse_multi_target_bounds
from .instance import Instance
from .lp import INFEASIBLE as LP_INFEASIBLE
from .lp import OPTIMAL as LP_OPTIMAL
from .lp import get_backend
from .master import PATH, TREE, RestrictedMaster, new_master
from .pricing import (DualSnapshot, adjusted_weights, initial_columns,
                      lagrangian_bound, price_paths, price_tree)

OPTIMAL = "optimal"
TIMEOUT = "timeout"
INFEASIBLE = "infeasible"

FORMULATIONS = (TREE, PATH, SOURCE_LP, EDGE_LP)


@dataclass(frozen=True)
class SolverConfig:
    """Everything the engine needs to run one solve."""

    formulation: str = TREE
    rel_tol: float = 1e-4
    timeout_seconds: float = 7200.0
    strategy: str = "auto"              # auto | master-easy | pricing-easy
    column_limit: int | None = None     # pricing-easy: stop after this many columns
    filter_epsilon: float | None = None  # master-easy: drop filter below this yield
    pricing_strategy: str = "full"      # full | bounded | astar
    heuristic_scope: str = "global"     # global | per-source
    seed: int = 0
    lp_backend: str = "builtin"
    threads: int = 1
    slack_policy: str = "auto"
    retire_after: int | None = None
    initial_capacity_edges: tuple[int, ...] = ()
    max_big_m_escalations: int = 3

    def validate(self) -> None:
        if self.formulation not in FORMULATIONS:
            raise InputError(f"unknown formulation {self.formulation!r}")
        if self.rel_tol <= 0:
            raise InputError("rel_tol must be positive")
        if self.strategy not in ("auto", "master-easy", "pricing-easy"):
            raise InputError(f"unknown strategy {self.strategy!r}")
        if self.pricing_strategy not in ("full", "bounded", "astar"):
            raise InputError(f"unknown pricing strategy {self.pricing_strategy!r}")
        if self.heuristic_scope not in ("global", "per-source"):
            raise InputError(f"unknown heuristic scope {self.heuristic_scope!r}")
        if self.column_limit is not None and self.column_limit < 1:
            raise InputError("column_limit must be at least 1")
        if self.filter_epsilon is not None and self.filter_epsilon < 0:
            raise InputError("filter_epsilon must be nonnegative")


@dataclass
class IterationStat:
    rmp_objective: float
    columns_added: int = 0
    rows_added: int = 0
    pricing_runs: int = 0
    elapsed: float = 0.0
    lower_bound: float = -np.inf


@dataclass
class SolveReport:
    """Outcome of one solve: bounds, status, and the iteration trace."""

    status: str
    objective: float
    lower_bound: float
    gap: float
    iterations: list[IterationStat] = field(default_factory=list)
    peak_columns: int = 0
    active_rows: int = 0
    wall_time: float = 0.0
    message: str = ""
    infeasible_owners: tuple = ()

    @property
    def iteration_count(self) -> int:
        return len(self.iterations)


def choose_strategy(instance: Instance) -> str:
    """Pick the balancing strategy for ``auto`` mode.

    Instances with more commodities than nodes have cheap batched
    pricing relative to the master (pricing-easy); huge networks with
    few commodities are the opposite.
    """
    if len(instance.commodities) > instance.network.node_count:
        return "pricing-easy"
    return "master-easy"


def relative_gap(upper: float, lower: float) -> float:
    if upper == np.inf or lower == -np.inf:
        return np.inf
    return (upper - lower) / max(1.0, abs(upper))


class ColGenSolver:
    """One column generation run over a fixed instance and config."""

    def __init__(self, instance: Instance, config: SolverConfig):
        config.validate()
        if config.formulation not in (TREE, PATH):
            raise InputError("ColGenSolver handles the tree and path formulations")
        self.instance = instance
        self.config = config
        self.mode = config.formulation
        self.strategy = config.strategy
        if self.strategy == "auto":
            self.strategy = choose_strategy(instance)
        n_sources = len(instance.groups)
        self.column_limit = config.column_limit or max(n_sources, 100)
        self.filter_epsilon = config.filter_epsilon if config.filter_epsilon is not None \
            else max(n_sources / 100.0, 1.0)
        self.backend = get_backend(config.lp_backend)
        self.master: RestrictedMaster = new_master(
            instance, self.mode, slack_policy=config.slack_policy,
            initial_capacity_edges=config.initial_capacity_edges,
            retire_after=config.retire_after)
        if self.mode == PATH:
            self.owner_weights = {k: c.demand
                                  for k, c in enumerate(instance.commodities)}
        else:
            self.owner_weights = {g.source: 1.0 for g in instance.groups}
        self._slack_tol = 1e-7 * (1.0 + float(self.master.demand_rhs.max()))

        self.best_lb = -np.inf
        self.best_ub = np.inf
        self.iterations: list[IterationStat] = []
        self.peak_columns = 0
        self.status: str | None = None
        self.message = ""
        self.infeasible_owners: tuple = ()
        self.filter_active = self.strategy == "master-easy"
        self.pending_edges: set[int] = set()
        self._escalations_left = config.max_big_m_escalations
        self._bounds_global: HeuristicBounds | None = None
        self._bounds_per_source: dict[int, HeuristicBounds] = {}
        self._t0 = 0.0
        if self.mode == PATH and config.pricing_strategy == "astar":
            self._prepare_bounds()

    # -- setup ---------------------------------------------------------------

    def _prepare_bounds(self) -> None:
        # Bounds are built under the original costs: the adjusted costs
        # are always pointwise heavier, so admissibility is preserved
        # across dual updates and nothing needs recomputing per round.
        net = self.instance.network
        if self.config.heuristic_scope == "global":
            sinks = {t for g in self.instance.groups for t in g.sink_demands}
            self._bounds_global = reverse_multi_target_bounds(net, net.cost, sinks)
        else:
            for g in self.instance.groups:
                self._bounds_per_source[g.source] = reverse_multi_target_bounds(
                    net, net.cost, set(g.sink_demands))

    def _bounds_for(self, source: int) -> HeuristicBounds | None:
        if self.config.heuristic_scope == "global":
            return self._bounds_global
        return self._bounds_per_source.get(source)

    # -- main loop -----------------------------------------------------------

    def run(self) -> SolveReport:
        self._t0 = time.perf_counter()
        try:
            for col in initial_columns(self.instance, self.mode):
                self.master.add_column(col)
        except InfeasibleError as exc:
            self.status = INFEASIBLE
            self.message = str(exc)
            self.infeasible_owners = exc.owners
            return self._report()
        self.peak_columns = self.master.pool_size

        while self.status is None:
            if time.perf_counter() - self._t0 > self.config.timeout_seconds:
                self.status = TIMEOUT
                break
            if self.strategy == "master-easy":
                self.run_master_easy_iteration()
            else:
                self.run_pricing_easy_iteration()
        return self._report()

    def _solve_and_check(self):
        sol = self.master.solve_rmp(self.backend)
        viol = self.master.violated_capacities()
        slack_ok = (sol.max_slack <= self._slack_tol
                    and sol.artificial <= self._slack_tol)
        if not viol and slack_ok:
            self.best_ub = min(self.best_ub, sol.objective)
            if relative_gap(sol.objective, self.best_lb) <= self.config.rel_tol:
                self.status = OPTIMAL
        return sol, viol, slack_ok

    def run_master_easy_iteration(self) -> None:
        """One master-easy iteration: rows first, then filtered pricing."""
        sol, viol, slack_ok = self._solve_and_check()
        if self.status is not None:
            return
        it = IterationStat(sol.objective)
        if viol:
            self.master.add_capacity_rows(viol)
            self.pending_edges.update(viol)
            it.rows_added = len(viol)
            self._push(it)
            return
        filtered = bool(self.filter_active and self.pending_edges)
        owners = self.master.owners_touching(self.pending_edges) if filtered else None
        columns, min_rc, runs, _ = self._price_round(owners=owners)
        self.pending_edges.clear()
        it.pricing_runs = runs
        it.columns_added = self._add_columns(columns)
        if filtered:
            if it.columns_added < self.filter_epsilon:
                self.filter_active = False
        else:
            lb = lagrangian_bound(sol.objective, min_rc, self.owner_weights)
            if lb is not None:
                self.best_lb = max(self.best_lb, lb)
            if it.columns_added == 0:
                self._finish(sol, slack_ok, it)
                return
        self._push(it)

    def run_pricing_easy_iteration(self) -> None:
        """One pricing-easy iteration: separate rows and price together."""
        sol, viol, slack_ok = self._solve_and_check()
        if self.status is not None:
            return
        it = IterationStat(sol.objective)
        if viol:
            self.master.add_capacity_rows(viol)
            it.rows_added = len(viol)
        columns, min_rc, runs, complete = self._price_round(limit=self.column_limit)
        it.pricing_runs = runs
        it.columns_added = self._add_columns(columns)
        if complete:
            lb = lagrangian_bound(sol.objective, min_rc, self.owner_weights)
            if lb is not None:
                self.best_lb = max(self.best_lb, lb)
        if it.columns_added == 0 and complete and not viol:
            self._finish(sol, slack_ok, it)
            return
        self._push(it)

    def _finish(self, sol, slack_ok: bool, it: IterationStat) -> None:
        """No violated rows and a complete empty pricing round: either
        optimal, or slack remains and big-M was too small (escalate), or
        the instance is infeasible."""
        if slack_ok:
            self.best_ub = min(self.best_ub, sol.objective)
            self.best_lb = max(self.best_lb, sol.objective)
            self.status = OPTIMAL
            self._push(it)
            return
        if self._escalations_left > 0:
            self._escalations_left -= 1
            self.master.escalate_big_m()
            self._push(it)
            return
        rows = self.master.positive_slack_rows(self._slack_tol)
        owners = tuple(label for _, label in rows)
        self.status = INFEASIBLE
        self.message = (f"slack remains on rows {rows[:10]} after big-M "
                        "escalation; demands cannot be routed within capacity")
        self.infeasible_owners = owners
        self._push(it)

    # -- pricing -------------------------------------------------------------

    def _price_round(self, owners=None, limit: int | None = None):
        """Price groups in source order.

        Returns (columns, min_reduced_cost, runs, complete). ``owners``
        restricts pricing to those owners (the master-easy filter);
        ``limit`` stops the sweep once that many columns were found.
        Unpriced owners map to None.
        """
        sol = self.master.solution
        duals = DualSnapshot(pi=dict(sol.pi), mu=sol.mu)
        weights = adjusted_weights(self.instance.network, sol.mu)
        tolerance = 1e-9 * (1.0 + abs(sol.objective))
        min_rc: dict[int, float | None] = {o: None for o in self.owner_weights}
        columns = []
        runs = 0

        groups = self.instance.groups
        if owners is not None:
            if self.mode == TREE:
                groups = [g for g in groups if g.source in owners]
            else:
                groups = [g for g in groups if any(k in owners for k in g.members)]

        def price_one(group):
            if self.mode == TREE:
                return price_tree(self.instance, group, duals,
                                  tolerance=tolerance, weights=weights)
            members = None if owners is None else \
                [k for k in group.members if k in owners]
            return price_paths(self.instance, group, duals,
                               strategy=self.config.pricing_strategy,
                               bounds=self._bounds_for(group.source),
                               tolerance=tolerance, weights=weights,
                               members=members)

        threads = max(1, self.config.threads)
        found = 0
        stop = False
        if threads == 1:
            for group in groups:
                outcome = price_one(group)
                runs += outcome.stats.runs
                columns.extend(outcome.columns)
                min_rc.update(outcome.min_reduced_cost)
                found += len(outcome.columns)
                if limit is not None and found >= limit:
                    stop = True
                    break
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunk = max(1, 4 * threads)
                for lo in range(0, len(groups), chunk):
                    batch = groups[lo:lo + chunk]
                    for outcome in pool.map(price_one, batch):
                        if stop:
                            break
                        runs += outcome.stats.runs
                        columns.extend(outcome.columns)
                        min_rc.update(outcome.min_reduced_cost)
                        found += len(outcome.columns)
                        if limit is not None and found >= limit:
                            stop = True
                    if stop:
                        break
        complete = all(v is not None for v in min_rc.values())
        return columns, min_rc, runs, complete

    def _add_columns(self, columns) -> int:
        added = 0
        for col in columns:
            before = self.master.pool_size
            self.master.add_column(col)
            added += self.master.pool_size - before
        self.peak_columns = max(self.peak_columns, self.master.pool_size)
        return added

    # -- reporting -----------------------------------------------------------

    def _push(self, it: IterationStat) -> None:
        it.elapsed = time.perf_counter() - self._t0
        it.lower_bound = self.best_lb
        self.iterations.append(it)

    def _gap(self) -> float:
        return relative_gap(self.best_ub, self.best_lb)

    def _report(self) -> SolveReport:
        wall = time.perf_counter() - self._t0
        objective = self.best_ub
        lower = self.best_lb
        gap = 0.0 if self.status == OPTIMAL else relative_gap(objective, lower)
        return SolveReport(
            status=self.status or TIMEOUT,
            objective=float(objective),
            lower_bound=float(lower),
            gap=float(gap),
            iterations=self.iterations,
            peak_columns=self.peak_columns,
            active_rows=len(self.master.active_edges),
            wall_time=wall,
            message=self.message,
            infeasible_owners=self.infeasible_owners,
        )


def solve(instance: Instance, config: SolverConfig | None = None) -> SolveReport:
    """Solve an instance with any of the four formulations."""
    config = config or SolverConfig()
    config.validate()
    if config.formulation in (TREE, PATH):
        return ColGenSolver(instance, config).run()
    return _solve_direct_formulation(instance, config)


def _solve_direct_formulation(instance: Instance, config: SolverConfig) -> SolveReport:
    t0 = time.perf_counter()
    build = build_edge_lp if config.formulation == EDGE_LP else build_source_lp
    direct = build(instance)
    sol = solve_direct(direct, config.lp_backend)
    wall = time.perf_counter() - t0
    if sol.status == LP_INFEASIBLE:
        return SolveReport(INFEASIBLE, np.inf, np.inf, np.inf, wall_time=wall,
                           message="direct LP is infeasible")
    if sol.status != LP_OPTIMAL:
        return SolveReport(INFEASIBLE, np.nan, np.nan, np.inf, wall_time=wall,
                           message=f"direct LP returned {sol.status}")
    it = IterationStat(sol.objective, elapsed=wall)
    return SolveReport(OPTIMAL, sol.objective, sol.objective, 0.0,
                       iterations=[it], active_rows=instance.network.edge_count,
                       wall_time=wall)
