"""Exact solver checks: hand instances, oracle agreement, extraction."""

import numpy as np
import pytest

from tpoplan.bench import random_tour_graph
from tpoplan.errors import DisconnectedSelectionError
from tpoplan.gtsp import TourGraph, TourNode, TourSubset
from tpoplan.milp import (
    MilpSolution,
    export_lp,
    extract_tours,
    formulate,
    solve,
)
from tpoplan.oracle import brute_force
from tpoplan.tpo import INF


def synthetic_tg(
    cost_rows,
    subsets,
    depots=(0,),
    windows=None,
    pair_bounds=None,
    vertex=None,
    return_to_depot=False,
):
    """Build a tour graph straight from a cost matrix.

    ``subsets`` maps subset index -> (event name or None, node ids).
    Node cells are synthetic placeholders.
    """
    n = len(cost_rows)
    nodes = []
    for node_id in range(n):
        subset = next(s for s, (_, ids) in subsets.items() if node_id in ids)
        event = subsets[subset][0]
        nodes.append(TourNode(id=node_id, cell=(node_id, 0), subset=subset, event=event))
    subset_objs = tuple(
        TourSubset(index=s, event=ev, nodes=tuple(ids))
        for s, (ev, ids) in sorted(subsets.items())
    )
    cost = np.array(cost_rows, dtype=float)
    return TourGraph(
        nodes=tuple(nodes),
        subsets=subset_objs,
        depots=tuple(depots),
        edge_cost=cost,
        vertex_cost=np.array(vertex or [0.0] * n, dtype=float),
        windows=windows or {},
        pair_bounds=pair_bounds or {},
        edge_paths={},
        return_to_depot=return_to_depot,
    )


def two_stop_tg(pair_bounds=None, windows=None):
    # depot 0, A=1, B=2; going A then B costs 3, B then A costs 4
    cost = [
        [INF, 1.0, 2.0],
        [0.0, INF, 2.0],
        [0.0, 2.0, INF],
    ]
    return synthetic_tg(
        cost,
        {0: (None, [0]), 1: ("A", [1]), 2: ("B", [2])},
        windows=windows,
        pair_bounds=pair_bounds,
    )


class TestFormulate:
    def test_binary_count_matches_admissible_edges(self):
        model = formulate(two_stop_tg(), robots=1)
        assert len(model.edges) == 6

    def test_big_m_dominates_reachable_times(self):
        tg = two_stop_tg(pair_bounds={(1, 2): (5.0, INF)})
        model = formulate(tg, robots=1)
        assert model.big_m > 5.0 + 3.0


class TestSolveSmall:
    def test_two_stops_no_timing(self):
        sol = solve(formulate(two_stop_tg(), robots=1))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0, abs=1e-6)
        oracle = brute_force(two_stop_tg(), robots=1)
        assert oracle.makespan == pytest.approx(3.0, abs=1e-9)

    def test_two_stops_with_gap_bound(self):
        # waiting is implicit: B may complete later than its arrival
        tg = two_stop_tg(pair_bounds={(1, 2): (5.0, INF)})
        sol = solve(formulate(tg, robots=1))
        oracle = brute_force(tg, robots=1)
        assert sol.status == "optimal"
        assert oracle.makespan == pytest.approx(sol.objective, abs=1e-6)
        assert sol.objective == pytest.approx(6.0, abs=1e-6)

    def test_empty_window_infeasible(self):
        tg = two_stop_tg(windows={1: (10.0, 5.0)})
        sol = solve(formulate(tg, robots=1))
        assert sol.status == "infeasible"

    def test_two_robots_split_symmetric_stops(self):
        cost = [
            [INF, 1.0, 1.0],
            [0.0, INF, 2.0],
            [0.0, 2.0, INF],
        ]
        tg = synthetic_tg(
            cost,
            {0: (None, [0]), 1: ("A", [1]), 2: ("B", [2])},
            depots=(0, 0),
        )
        sol = solve(formulate(tg, robots=2))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_idle_robot_never_hurts(self):
        # a second robot must be allowed to stay home when helping is harmful
        tg1 = two_stop_tg(pair_bounds={(1, 2): (0.0, 2.0)})
        one = solve(formulate(tg1, robots=1))
        tg2 = two_stop_tg(pair_bounds={(1, 2): (0.0, 2.0)})
        tg2 = type(tg2)(**{**tg2.__dict__, "depots": (0, 0)})
        two = solve(formulate(tg2, robots=2))
        assert two.objective <= one.objective + 1e-6

    def test_flow_balance_on_solution(self):
        tg = random_tour_graph(5, 1, 0.5, 10.0, grid=(12, 12), seed=3)
        sol = solve(formulate(tg, robots=1))
        degree = {}
        for i, j in sol.edges:
            degree[i] = degree.get(i, 0) + 1
            degree[j] = degree.get(j, 0) - 1
        assert all(v == 0 for v in degree.values())


class TestOracleAgreement:
    @pytest.mark.parametrize("seed", range(12))
    def test_single_robot_random(self, seed):
        tg = random_tour_graph(5, 1, 0.5, 12.0, grid=(10, 10), seed=seed)
        sol = solve(formulate(tg, robots=1))
        oracle = brute_force(tg, robots=1)
        assert sol.status == "optimal"
        assert oracle.feasible
        assert sol.objective == pytest.approx(oracle.makespan, abs=1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_two_robot_random(self, seed):
        tg = random_tour_graph(4, 2, 0.5, 12.0, grid=(10, 10), seed=100 + seed)
        sol = solve(formulate(tg, robots=2))
        oracle = brute_force(tg, robots=2)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(oracle.makespan, abs=1e-6)

    def test_return_to_depot_costs_count(self):
        cost = [
            [INF, 1.0, 4.0],
            [1.0, INF, 2.0],
            [4.0, 2.0, INF],
        ]
        tg = synthetic_tg(
            cost,
            {0: (None, [0]), 1: ("A", [1]), 2: ("B", [2])},
            return_to_depot=True,
        )
        sol = solve(formulate(tg, robots=1))
        oracle = brute_force(tg, robots=1)
        assert sol.objective == pytest.approx(oracle.makespan, abs=1e-6)
        assert sol.objective == pytest.approx(7.0, abs=1e-6)  # 0->A->B->0


class TestExtraction:
    def test_single_robot_tour_shape(self):
        tg = random_tour_graph(3, 1, 0.5, 10.0, grid=(8, 8), seed=5)
        sol = solve(formulate(tg, robots=1))
        tours = extract_tours(sol, tg, robots=1)
        assert len(tours) == 1
        assert len(tours[0]) == 4  # depot + 3 stops, no return entry
        assert tours[0][0] == tg.depots[0]

    def test_two_robot_tours_partition_subsets(self):
        tg = random_tour_graph(5, 2, 0.25, 15.0, grid=(10, 10), seed=9)
        sol = solve(formulate(tg, robots=2))
        tours = extract_tours(sol, tg, robots=2)
        subsets = [tg.nodes[v].subset for t in tours for v in t[1:]]
        assert sorted(subsets) == sorted(
            s.index for s in tg.subsets if s.event is not None
        )

    def test_depot_free_cycle_rejected(self):
        tg = two_stop_tg()
        corrupted = MilpSolution(
            status="optimal",
            objective=0.0,
            best_bound=0.0,
            edges=((1, 2), (2, 1)),
            tau={0: 0.0, 1: 0.0, 2: 0.0},
            tau_final=0.0,
        )
        with pytest.raises(DisconnectedSelectionError):
            extract_tours(corrupted, tg, robots=1)


class TestDeterminismAndExport:
    def test_solver_deterministic(self):
        tg = random_tour_graph(6, 1, 0.5, 10.0, grid=(10, 10), seed=21)
        a = solve(formulate(tg, robots=1), deterministic=True)
        b = solve(formulate(tg, robots=1), deterministic=True)
        assert a.objective == b.objective
        assert a.edges == b.edges
        assert a.tau == b.tau

    def test_lp_export_stable_and_complete(self):
        model = formulate(two_stop_tg(pair_bounds={(1, 2): (5.0, INF)}), robots=1)
        text = export_lp(model)
        assert text == export_lp(model)
        assert "Minimize" in text and "Binaries" in text and "End" in text
        assert "tpo_lo_1_2" in text
        # every admissible edge appears both as a binary and in a time row
        for i, j in model.edges:
            assert f"y_{i}_{j}" in text


def test_solution_satisfies_all_rows():
    tg = random_tour_graph(5, 1, 1.0, 8.0, grid=(10, 10), seed=33)
    model = formulate(tg, robots=1)
    sol = solve(model)
    assert sol.status == "optimal"
    x = np.zeros(model.nvars)
    for (i, j) in sol.edges:
        x[model.var_y[(i, j)]] = 1.0
    for node_id, t in sol.tau.items():
        x[model.var_tau[node_id]] = t
    x[model.var_final] = sol.tau_final
    rows = model.static_rows + model.lazy_rows
    senses = model.static_senses + [">="] * len(model.lazy_rows)
    rhs = model.static_rhs + model.lazy_rhs
    for row, sense, b in zip(rows, senses, rhs):
        val = sum(coef * x[idx] for idx, coef in row.items())
        if sense == "<=":
            assert val <= b + 1e-6
        elif sense == ">=":
            assert val >= b - 1e-6
        else:
            assert val == pytest.approx(b, abs=1e-6)
