"""Restricted master tests: hand LPs, lazy rows, slacks, dual signs."""

import numpy as np
import pytest

from mcflow.errors import InputError
from mcflow.instance import generate_random
from mcflow.master import Column, RestrictedMaster, new_master, validate_column

TREE_COL = Column(owner=0, kind="tree", edges=(0, 1), coefs=(3.0, 2.0), cost=5.0)
PATH_ABC = Column(owner=0, kind="path", edges=(0, 1), coefs=(1.0, 1.0), cost=2.0)
PATH_AC = Column(owner=0, kind="path", edges=(2,), coefs=(1.0,), cost=3.0)
PATH_AB = Column(owner=1, kind="path", edges=(0,), coefs=(1.0,), cost=1.0)


class TestNewMaster:
    def test_tree_mode_row_count(self, triangle):
        m = new_master(triangle, "tree")
        assert len(m.owners) == 1
        assert len(m.active_edges) == 0

    def test_path_mode_row_count(self, triangle):
        m = new_master(triangle, "path")
        assert len(m.owners) == 2
        assert list(m.demand_rhs) == [2.0, 1.0]

    def test_slack_policy_rule(self, triangle):
        # 2 path rows < 3 edges -> demand slack; forcing edge policy works too.
        assert new_master(triangle, "path").slack_policy == "demand"
        assert new_master(triangle, "path", slack_policy="edge").slack_policy == "edge"

    def test_big_m_values(self, triangle):
        path_m = new_master(triangle, "path")
        tree_m = new_master(triangle, "tree")
        assert path_m.big_m == pytest.approx(5.0)          # sum of edge costs
        assert tree_m.big_m == pytest.approx(5.0 * 3.0)    # times total demand


class TestAddColumn:
    def test_insert_and_dedup(self, triangle):
        m = new_master(triangle, "path")
        cid = m.add_column(PATH_ABC)
        assert m.pool_size == 1
        assert m.add_column(PATH_ABC) == cid
        assert m.pool_size == 1

    def test_tree_cycle_rejected(self, triangle):
        m = new_master(triangle, "tree")
        bad = Column(owner=0, kind="tree", edges=(0, 1, 2), coefs=(1.0, 1.0, 1.0),
                     cost=5.0)
        with pytest.raises(InputError, match="in-degree"):
            m.add_column(bad)

    def test_path_validation(self, triangle):
        # Edges out of order do not form a contiguous path.
        bad = Column(owner=0, kind="path", edges=(1, 0), coefs=(1.0, 1.0), cost=2.0)
        with pytest.raises(InputError, match="contiguous"):
            validate_column(bad, triangle)

    def test_cost_identity_enforced(self, triangle):
        bad = Column(owner=0, kind="path", edges=(0, 1), coefs=(1.0, 1.0), cost=9.0)
        with pytest.raises(InputError, match="cost"):
            validate_column(bad, triangle)


class TestSolveRmp:
    def test_single_tree_column(self, triangle):
        m = new_master(triangle, "tree")
        m.add_column(TREE_COL)
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(5.0)
        assert sol.pi[0] == pytest.approx(5.0)
        assert np.all(sol.mu == 0.0)

    def test_slack_only_master(self, triangle):
        m = new_master(triangle, "tree")
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(m.big_m)
        assert sol.pi[0] == pytest.approx(m.big_m)
        assert sol.max_slack == pytest.approx(1.0)

    def test_path_mode_two_columns(self, triangle):
        m = new_master(triangle, "path")
        m.add_column(PATH_ABC)
        m.add_column(PATH_AB)
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(2.0 * 2 + 1.0)

    def test_capacity_row_raises_objective(self, triangle_capped):
        m = new_master(triangle_capped, "path")
        for col in (PATH_ABC, PATH_AC, PATH_AB):
            m.add_column(col)
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(5.0)      # capacity ignored so far
        assert m.violated_capacities() == [1]           # b->c at flow 2 > cap 1
        m.add_capacity_rows([1])
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(6.0)
        flows = m.aggregate_edge_flows()
        assert flows[1] <= 1.0 + 1e-9
        assert m.violated_capacities() == []

    def test_add_active_edge_is_noop(self, triangle):
        m = new_master(triangle, "tree")
        m.add_capacity_rows([1])
        m.add_capacity_rows([1])
        assert m.active_edges == [1]

    def test_vacuous_capacity_row(self, triangle):
        m = new_master(triangle, "tree")
        m.add_column(TREE_COL)
        m.add_capacity_rows([2])    # a->c used by no pooled column
        sol = m.solve_rmp()
        assert sol.objective == pytest.approx(5.0)
        assert sol.mu[2] == pytest.approx(0.0)

    def test_exactly_at_capacity_not_violated(self, triangle):
        m = new_master(triangle, "tree")
        # Tree carries 2 units on b->c; capacity exactly 2 on that edge.
        inst = triangle
        inst.network.capacity.setflags(write=True)
        inst.network.capacity[1] = 2.0
        inst.network.capacity.setflags(write=False)
        m.add_column(TREE_COL)
        m.solve_rmp()
        assert m.violated_capacities() == []


class TestDualNormalization:
    def test_mu_nonpositive_and_adjusted_costs_nonnegative(self):
        inst = generate_random(12, 30, 10, 3, seed=2, tightness="tight")
        m = new_master(inst, "tree")
        from mcflow.pricing import initial_columns
        for col in initial_columns(inst, "tree"):
            m.add_column(col)
        sol = m.solve_rmp()
        for _ in range(10):
            viol = m.violated_capacities()
            if not viol:
                break
            m.add_capacity_rows(viol)
            sol = m.solve_rmp()
        assert np.all(sol.mu <= 0.0)
        assert np.all(inst.network.cost - sol.mu >= 0.0)

    def test_inactive_rows_expose_zero_dual(self, triangle):
        m = new_master(triangle, "tree")
        m.add_column(TREE_COL)
        sol = m.solve_rmp()
        assert list(sol.mu) == [0.0, 0.0, 0.0]


class TestMonotonicity:
    def test_objective_nonincreasing_with_columns(self, triangle_capped):
        m = new_master(triangle_capped, "path")
        m.add_column(PATH_ABC)
        m.add_column(PATH_AB)
        m.add_capacity_rows([1])
        z1 = m.solve_rmp().objective
        m.add_column(PATH_AC)
        z2 = m.solve_rmp().objective
        assert z2 <= z1 + 1e-9

    def test_objective_nondecreasing_with_rows(self, triangle_capped):
        m = new_master(triangle_capped, "path")
        for col in (PATH_ABC, PATH_AC, PATH_AB):
            m.add_column(col)
        z1 = m.solve_rmp().objective
        m.add_capacity_rows([1])
        z2 = m.solve_rmp().objective
        assert z2 >= z1 - 1e-9


class TestRetirement:
    def test_columns_retire_after_streak(self, triangle):
        m = new_master(triangle, "path", retire_after=2)
        m.add_column(PATH_ABC)
        m.add_column(PATH_AC)   # strictly worse, never basic
        m.add_column(PATH_AB)
        for _ in range(2):
            m.solve_rmp()
        assert m.column_active == [True, False, True]
        # Re-adding reactivates the retired column.
        m.add_column(PATH_AC)
        assert m.column_active == [True, True, True]
