"""Tour-graph construction and shortest-path costs."""

from collections import deque

import numpy as np
import pytest

from tpoplan.dts import TransitionSystem
from tpoplan.errors import UnreachableEventError, UnrealizableEventError
from tpoplan.gtsp import all_pairs_shortest, build_tour_graph, dump_tour_graph
from tpoplan.tpo import INF, raw_constraints


def empty_ts(width, height, starts=((0, 0),), labels=None, walls=()):
    return TransitionSystem(
        width=width,
        height=height,
        walls=frozenset(walls),
        initial_states=tuple(starts),
        labels=labels or {},
    )


def bfs_oracle(ts, src, dst):
    """Unit-cost shortest path ignoring nothing but walls and labels."""
    if src == dst:
        return 0
    seen = {src}
    queue = deque([(src, 0)])
    while queue:
        cell, d = queue.popleft()
        for _, nxt, _ in ts.neighbors(cell):
            if nxt in seen:
                continue
            if nxt == dst:
                return d + 1
            if nxt in ts.labels:
                continue  # absorbing
            seen.add(nxt)
            queue.append((nxt, d + 1))
    return INF


def test_corridor_cost():
    ts = empty_ts(3, 1)
    cost, paths = all_pairs_shortest(ts, {(0, 0), (2, 0)})
    assert cost[((0, 0), (2, 0))] == 2
    assert paths[((0, 0), (2, 0))] == ((0, 0), (1, 0), (2, 0))


def test_walled_off_is_infinite():
    ts = empty_ts(3, 1, walls=[(1, 0)])
    cost, _ = all_pairs_shortest(ts, {(0, 0), (2, 0)})
    assert cost[((0, 0), (2, 0))] == INF


def test_big_grid_manhattan():
    ts = empty_ts(30, 30)
    cost, _ = all_pairs_shortest(ts, {(0, 0), (29, 29)})
    assert cost[((0, 0), (29, 29))] == 58
    assert bfs_oracle(ts, (0, 0), (29, 29)) == 58


def test_paths_avoid_other_labeled_cells():
    # a labeled cell sits on the only direct route; the witness must detour
    labels = {(1, 0): "block", (2, 0): "goal"}
    ts = empty_ts(3, 2, labels=labels)
    cost, paths = all_pairs_shortest(ts, {(0, 0), (1, 0), (2, 0)})
    assert cost[((0, 0), (2, 0))] == 4
    assert (1, 0) not in paths[((0, 0), (2, 0))][1:-1]
    for pair, path in paths.items():
        for cell in path[1:-1]:
            assert cell not in ts.labels


def test_costs_match_bfs_oracle_on_random_grids():
    import random

    rng = random.Random(11)
    for _ in range(10):
        width, height = rng.randint(4, 8), rng.randint(4, 8)
        cells = [(x, y) for x in range(width) for y in range(height)]
        rng.shuffle(cells)
        walls = cells[:4]
        poi = cells[4:9]
        labels = {c: f"e{k}" for k, c in enumerate(poi[1:])}
        ts = empty_ts(width, height, starts=(poi[0],), labels=labels, walls=walls)
        cost, paths = all_pairs_shortest(ts, set(poi))
        for a in poi:
            for b in poi:
                if a == b:
                    continue
                assert cost[(a, b)] == bfs_oracle(ts, a, b)
                if cost[(a, b)] < INF:
                    assert len(paths[(a, b)]) - 1 == cost[(a, b)]


def chain_layout():
    # staggered so no event sits on another pair's only shortest corridor
    return {(1, 0): "grey", (3, 3): "yellow", (5, 0): "blue", (7, 3): "red"}


def chain_tg(return_to_depot=False):
    ts = empty_ts(10, 4, starts=((0, 2),), labels=chain_layout())
    dcs = raw_constraints(
        ("grey", "yellow", "blue", "red"),
        [("grey", "yellow", 0.0, None), ("yellow", "blue", 0.0, None),
         ("blue", "red", 0.0, None)],
    )
    return build_tour_graph(ts, dcs, return_to_depot=return_to_depot)


class TestBuildTourGraph:
    def test_subsets_partition_nodes(self):
        tg = chain_tg()
        seen = set()
        for s in tg.subsets:
            for node_id in s.nodes:
                assert node_id not in seen
                seen.add(node_id)
                assert tg.nodes[node_id].subset == s.index
                assert tg.nodes[node_id].event == s.event
        assert seen == {n.id for n in tg.nodes}

    def test_transitive_precedence_forbids_reverse_edges(self):
        tg = chain_tg()
        by_event = {n.event: n.id for n in tg.nodes if n.event}
        # grey precedes red transitively, so red -> grey is inadmissible
        assert tg.edge_cost[by_event["red"], by_event["grey"]] == INF
        assert tg.edge_cost[by_event["grey"], by_event["red"]] < INF

    def test_unconstrained_events_keep_all_edges(self):
        labels = {(2, 0): "a", (4, 0): "b"}
        ts = empty_ts(6, 1, labels=labels)
        tg = build_tour_graph(ts, raw_constraints(("a", "b")))
        ids = {n.event: n.id for n in tg.nodes if n.event}
        assert tg.edge_cost[ids["a"], ids["b"]] < INF
        assert tg.edge_cost[ids["b"], ids["a"]] < INF

    def test_multi_cell_event_gets_multiple_nodes(self):
        labels = {(2, 0): "a", (4, 0): "a", (3, 1): "b"}
        ts = empty_ts(6, 2, labels=labels)
        tg = build_tour_graph(ts, raw_constraints(("a", "b")))
        subset = next(s for s in tg.subsets if s.event == "a")
        assert len(subset.nodes) == 2

    def test_unrealizable_event(self):
        ts = empty_ts(4, 1, labels={(2, 0): "a"})
        with pytest.raises(UnrealizableEventError):
            build_tour_graph(ts, raw_constraints(("a", "ghost")))

    def test_unreachable_event(self):
        ts = empty_ts(5, 1, labels={(4, 0): "a"}, walls=[(2, 0)])
        with pytest.raises(UnreachableEventError):
            build_tour_graph(ts, raw_constraints(("a",)))

    def test_triangle_inequality_on_finite_edges(self):
        tg = chain_tg()
        n = tg.num_nodes
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    dij, djk, dik = tg.edge_cost[i, j], tg.edge_cost[j, k], tg.edge_cost[i, k]
                    if dij < INF and djk < INF and dik < INF:
                        assert dik <= dij + djk + 1e-9

    def test_witness_paths_match_costs(self):
        tg = chain_tg()
        for (i, j), path in tg.edge_paths.items():
            assert len(path) - 1 == tg.edge_cost[i, j]

    def test_edge_filter_monotonicity(self):
        # dropping precedence never loses finite edges nor increases costs
        constrained = chain_tg()
        ts = empty_ts(10, 4, starts=((0, 2),), labels=chain_layout())
        free = build_tour_graph(ts, raw_constraints(("grey", "yellow", "blue", "red")))
        assert free.num_nodes == constrained.num_nodes
        for i in range(free.num_nodes):
            for j in range(free.num_nodes):
                if constrained.edge_cost[i, j] < INF:
                    assert free.edge_cost[i, j] <= constrained.edge_cost[i, j] + 1e-9
                    assert free.edge_cost[i, j] < INF

    def test_windows_and_pair_bounds_carried(self):
        labels = {(2, 0): "a", (4, 0): "b"}
        ts = empty_ts(6, 1, labels=labels)
        dcs = raw_constraints(
            ("a", "b"), [("a", "b", 3.0, 9.0)], [("a", 1.0, 7.0)]
        )
        tg = build_tour_graph(ts, dcs)
        sa = next(s.index for s in tg.subsets if s.event == "a")
        sb = next(s.index for s in tg.subsets if s.event == "b")
        assert tg.windows[sa] == (1.0, 7.0)
        assert tg.pair_bounds[(sa, sb)] == (3.0, 9.0)

    def test_service_delays_attached(self):
        labels = {(2, 0): "a"}
        ts = empty_ts(4, 1, labels=labels)
        tg = build_tour_graph(ts, raw_constraints(("a",)), service={"a": 2.5})
        node = next(n for n in tg.nodes if n.event == "a")
        assert tg.vertex_cost[node.id] == 2.5
        assert tg.vertex_cost[tg.depots[0]] == 0.0


def test_dump_is_stable():
    a = dump_tour_graph(chain_tg())
    b = dump_tour_graph(chain_tg())
    assert a == b
    assert "tour-graph nodes=5 subsets=5" in a
    assert "grey" in a and "inf" in a
