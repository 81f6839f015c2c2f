"""Engine tests: termination, strategy behavior, bounds, determinism."""

import random

import numpy as np
import pytest

from mcflow.baseline import build_edge_lp, solve_direct
from mcflow.engine import (ColGenSolver, SolveReport, SolverConfig,
                           choose_strategy, solve)
from mcflow.graph import Network, dijkstra
from mcflow.instance import Commodity, Instance, generate_random


def cfg(**kw):
    kw.setdefault("rel_tol", 1e-7)
    return SolverConfig(**kw)


class TestSolveBasics:
    def test_triangle_tree(self, triangle):
        r = solve(triangle, cfg(formulation="tree"))
        assert r.status == "optimal"
        assert r.objective == pytest.approx(5.0)
        assert r.lower_bound == pytest.approx(5.0)

    def test_capacitated_triangle_both_modes(self, triangle_capped):
        for form in ("tree", "path"):
            r = solve(triangle_capped, cfg(formulation=form))
            assert r.status == "optimal"
            assert r.objective == pytest.approx(6.0)
            assert r.active_rows >= 1

    def test_uncapacitated_equals_shortest_paths(self):
        inst = generate_random(14, 40, 10, 3, seed=11, tightness="loose")
        net = inst.network
        expected = 0.0
        for g in inst.groups:
            spt = dijkstra(net, net.cost, g.source)
            expected += sum(d * spt.dist[t] for t, d in g.sink_demands.items())
        for form in ("tree", "path"):
            r = solve(inst, cfg(formulation=form))
            assert r.objective == pytest.approx(expected, rel=1e-9)

    def test_infeasible_names_commodities(self):
        net = Network(3, [(0, 1, 1.0, 1.0)])
        inst = Instance.build(net, [Commodity(0, 1, 1.0), Commodity(0, 2, 2.0)])
        r = solve(inst, cfg(formulation="tree"))
        assert r.status == "infeasible"
        assert 1 in r.infeasible_owners

    def test_capacity_infeasible_detected(self):
        net = Network(2, [(0, 1, 1.0, 1.0)])
        inst = Instance.build(net, [Commodity(0, 1, 5.0)])
        for form in ("tree", "path"):
            r = solve(inst, cfg(formulation=form))
            assert r.status == "infeasible"

    def test_timeout_reports_valid_bounds(self):
        inst = generate_random(20, 60, 25, 6, seed=3, tightness="tight")
        r = solve(inst, cfg(formulation="tree", timeout_seconds=0.0))
        assert r.status == "timeout"

    def test_direct_formulations_routed(self, triangle_capped):
        for form in ("source-lp", "edge-lp"):
            r = solve(triangle_capped, cfg(formulation=form))
            assert r.status == "optimal"
            assert r.objective == pytest.approx(6.0)


class TestChooseStrategy:
    def test_many_commodities_prices_easily(self):
        # Small network, commodity count far above node count.
        inst = generate_random(10, 30, 50, 8, seed=0)
        assert choose_strategy(inst) == "pricing-easy"

    def test_few_commodities_on_big_network(self):
        inst = generate_random(60, 120, 10, 10, seed=0)
        assert choose_strategy(inst) == "master-easy"

    def test_explicit_override(self, triangle):
        solver = ColGenSolver(triangle, cfg(strategy="master-easy"))
        assert solver.strategy == "master-easy"
        solver = ColGenSolver(triangle, cfg(strategy="pricing-easy"))
        assert solver.strategy == "pricing-easy"


class TestStrategies:
    def test_pricing_easy_column_limit(self):
        inst = generate_random(12, 36, 12, 6, seed=5, tightness="tight")
        r = solve(inst, cfg(formulation="tree", strategy="pricing-easy",
                            column_limit=1))
        assert r.status == "optimal"
        # No iteration may add more than one column.
        assert all(it.columns_added <= 1 for it in r.iterations)

    def test_master_easy_rows_before_pricing(self):
        inst = generate_random(12, 36, 12, 4, seed=6, tightness="tight")
        r = solve(inst, cfg(formulation="tree", strategy="master-easy"))
        assert r.status == "optimal"
        for it in r.iterations:
            # An iteration that adds rows does no pricing in this strategy.
            if it.rows_added:
                assert it.pricing_runs == 0

    def test_both_strategies_same_objective(self):
        for seed in range(6):
            inst = generate_random(10, 30, 10, 3, seed=seed, tightness="mixed")
            objs = [solve(inst, cfg(formulation="tree", strategy=s)).objective
                    for s in ("master-easy", "pricing-easy")]
            assert objs[0] == pytest.approx(objs[1], rel=1e-7)

    def test_pricing_strategies_same_objective(self):
        for seed in range(5):
            inst = generate_random(12, 34, 10, 3, seed=100 + seed, tightness="mixed")
            objs = [solve(inst, cfg(formulation="path", pricing_strategy=p,
                                    heuristic_scope=h)).objective
                    for p, h in (("full", "global"), ("bounded", "global"),
                                 ("astar", "global"), ("astar", "per-source"))]
            for o in objs[1:]:
                assert o == pytest.approx(objs[0], rel=1e-7)


class TestBounds:
    def test_lb_monotone_and_sandwich(self):
        rng = random.Random(9)
        for seed in range(6):
            inst = generate_random(10, 30, 12, 3, seed=seed, tightness="tight")
            oracle = solve_direct(build_edge_lp(inst), "highs").objective
            for form in ("tree", "path"):
                solver = ColGenSolver(inst, cfg(formulation=form))
                lbs = []
                orig = solver._price_round

                def traced(*a, **kw):
                    out = orig(*a, **kw)
                    lbs.append(solver.best_lb)
                    return out

                solver._price_round = traced
                r = solver.run()
                assert r.status == "optimal"
                assert all(b <= a + 1e-9 for a, b in zip(lbs[1:], lbs))
                assert r.lower_bound <= oracle + 1e-6 * (1 + abs(oracle))
                assert r.objective >= oracle - 1e-6 * (1 + abs(oracle))

    def test_optimal_solution_feasible_for_all_capacities(self):
        for seed in range(6):
            inst = generate_random(12, 36, 14, 4, seed=seed, tightness="tight")
            solver = ColGenSolver(inst, cfg(formulation="tree"))
            r = solver.run()
            assert r.status == "optimal"
            flows = solver.master.aggregate_edge_flows()
            assert np.all(flows <= inst.network.capacity + 1e-6)
            assert solver.master.violated_capacities() == []
            assert r.active_rows <= inst.network.edge_count

    def test_termination_soundness_repricing_changes_nothing(self):
        from mcflow.pricing import lagrangian_bound
        for seed in range(5):
            inst = generate_random(11, 32, 12, 3, seed=40 + seed,
                                   tightness="mixed")
            for form in ("tree", "path"):
                solver = ColGenSolver(inst, cfg(formulation=form))
                r = solver.run()
                assert r.status == "optimal"
                assert solver.master.violated_capacities() == []
                # One more full unfiltered pricing round cannot improve the
                # objective beyond the configured tolerance.
                _, min_rc, _, complete = solver._price_round()
                assert complete
                lb = lagrangian_bound(r.objective, min_rc, solver.owner_weights)
                assert lb >= r.objective - 1e-7 * max(1.0, abs(r.objective))


class TestDeterminism:
    def test_identical_traces(self):
        inst = generate_random(12, 36, 12, 4, seed=8, tightness="mixed")
        def trace(threads=1):
            r = solve(inst, cfg(formulation="tree", threads=threads))
            return [(it.rmp_objective, it.columns_added, it.rows_added,
                     it.pricing_runs) for it in r.iterations]
        assert trace() == trace()
        assert trace() == trace(threads=4)


class TestReport:
    def test_iteration_trace_shape(self, triangle_capped):
        r = solve(triangle_capped, cfg(formulation="tree"))
        assert r.iteration_count == len(r.iterations)
        assert r.peak_columns >= 1
        assert r.wall_time >= 0.0
        assert r.gap == 0.0
