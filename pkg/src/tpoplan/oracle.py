"""Independent brute-force optimum for small tour instances.

Enumerates every choice of one node per subset, every split of subsets
between robots, and every per-robot visiting order, then times each
complete assignment exactly on the constraint distance graph (earliest
joint schedule; waiting is allowed anywhere).  This shares no code with the
LP/MILP path, so agreement between the two is meaningful evidence.

A hard guard rejects instances beyond 10 non-depot nodes or 2 robots; the
only search shortcut is pruning on a monotone travel-time lower bound,
which cannot change the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InstanceTooLargeError
from .gtsp import TourGraph
from .tpo import INF

MAX_NODES = 10
MAX_ROBOTS = 2


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    makespan: float
    tours: tuple[tuple[int, ...], ...]  # per robot, node ids without depots


def _schedule_makespan(tg: TourGraph, orders, robots: int) -> float:
    """Exact earliest makespan for fixed per-robot node orders, or inf.

    Builds the distance graph over the visited events (plus the origin) with
    travel-chain lower bounds and all window and pair bounds, runs
    Floyd-Warshall, and reads each event's earliest time; the earliest
    schedule is jointly minimal, so the makespan is the max over robots of
    the final completion (plus the return leg when required).
    """
    visited = [v for order in orders for v in order]
    subset_of = {tg.nodes[v].subset: v for v in visited}
    names = [None] + visited  # index 0 is the time origin
    index = {v: k + 1 for k, v in enumerate(visited)}
    n = len(names)
    dist = np.full((n, n), INF)
    np.fill_diagonal(dist, 0.0)

    def bound(i, j, lo, hi):
        # t_j - t_i in [lo, hi]
        if hi < INF:
            dist[i, j] = min(dist[i, j], hi)
        dist[j, i] = min(dist[j, i], -lo)

    for r in range(robots):
        order = orders[r]
        prev = tg.depots[r]
        prev_idx = 0
        for v in order:
            c = tg.edge_cost[prev, v]
            if c == INF:
                return INF
            inc = float(c + tg.vertex_cost[v])
            bound(prev_idx, index[v], inc, INF)
            prev, prev_idx = v, index[v]
        if tg.return_to_depot and order:
            if tg.edge_cost[order[-1], tg.depots[r]] == INF:
                return INF

    for subset, v in subset_of.items():
        lo, hi = tg.windows.get(subset, (0.0, INF))
        bound(0, index[v], lo, hi)
    for (sa, sb), (lo, hi) in tg.pair_bounds.items():
        if sa in subset_of and sb in subset_of:
            bound(index[subset_of[sa]], index[subset_of[sb]], lo, hi)

    for k in range(n):
        via = dist[:, k, None] + dist[None, k, :]
        np.minimum(dist, via, out=dist)
    if np.any(np.diag(dist) < -1e-9):
        return INF

    makespan = 0.0
    for r in range(robots):
        order = orders[r]
        if not order:
            continue
        earliest_last = -dist[index[order[-1]], 0]
        ret = tg.edge_cost[order[-1], tg.depots[r]] if tg.return_to_depot else 0.0
        makespan = max(makespan, earliest_last + float(ret))
    return makespan


def brute_force(tg: TourGraph, robots: int) -> OracleResult:
    """Exhaustive minimum makespan over all assignments and orders."""
    event_subsets = [s for s in tg.subsets if s.event is not None]
    total_nodes = sum(len(s.nodes) for s in event_subsets)
    if total_nodes > MAX_NODES or robots > MAX_ROBOTS:
        raise InstanceTooLargeError(total_nodes, robots)
    if robots != len(tg.depots):
        raise ValueError("robot count must match the tour graph's depots")

    best = INF
    best_orders: tuple[tuple[int, ...], ...] = tuple(() for _ in range(robots))

    # partial lower bound: travel chain only; monotone in extensions
    def travel_lb(orders):
        worst = 0.0
        for r in range(robots):
            t = 0.0
            prev = tg.depots[r]
            for v in orders[r]:
                c = tg.edge_cost[prev, v]
                if c == INF:
                    return INF
                t += float(c + tg.vertex_cost[v])
                prev = v
            lo = tg.windows.get(tg.nodes[orders[r][-1]].subset, (0.0, INF))[0] if orders[r] else 0.0
            worst = max(worst, t, lo)
        return worst

    remaining_all = [s.index for s in event_subsets]

    def dfs(robot, orders, remaining):
        # robots are filled one at a time so each tuple of per-robot orders
        # is generated exactly once
        nonlocal best, best_orders
        if robot == robots:
            if remaining:
                return
            span = _schedule_makespan(tg, orders, robots)
            if span < best - 1e-12:
                best = span
                best_orders = tuple(tuple(o) for o in orders)
            return
        if travel_lb(orders) >= best - 1e-12:
            return
        dfs(robot + 1, orders, remaining)  # close this robot's order
        for s_idx in remaining:
            for v in tg.subsets[s_idx].nodes:
                orders[robot].append(v)
                dfs(robot, orders, [s for s in remaining if s != s_idx])
                orders[robot].pop()

    dfs(0, [[] for _ in range(robots)], remaining_all)
    if best == INF:
        return OracleResult(feasible=False, makespan=INF, tours=tuple(() for _ in range(robots)))
    return OracleResult(feasible=True, makespan=best, tours=best_orders)
