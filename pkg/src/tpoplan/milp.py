"""Exact MILP solving of the tour problem via branch and bound.

The model has one binary per admissible edge and one continuous completion
time per node plus a final makespan variable.  Flow balance keeps node
degrees paired, subset degree rows force exactly one visit per event subset
(up to the robot count at depots, so surplus robots may idle), timing rows
carry the compiled difference bounds, and big-M rows propagate completion
times along enabled edges, which doubles as subtour elimination because the
increments are strictly positive.

Big-M time rows are activated lazily: most are slack at fractional points,
so each node's LP keeps only the rows its solutions have ever violated.
Activation is global and monotone, which preserves bound monotonicity down
the tree.  Branching is on the most fractional edge with lexicographic
tie-break; node selection is best-first by LP bound with deeper nodes
preferred among ties.
"""

from __future__ import annotations

import heapq
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DisconnectedSelectionError,
    NoFiniteEdgesError,
    NumericalFailureError,
)
from .gtsp import TourGraph
from .simplex import INFEASIBLE, OPTIMAL, LpWorkspace
from .tpo import INF

_INT_TOL = 1e-7
_OBJ_TOL = 1e-9
#: tie-break increment for zero-increment edges so no zero-cost cycle is free
_SUBTOUR_EPS = 1e-6


@dataclass
class MilpModel:
    tg: TourGraph
    robots: int
    edges: tuple[tuple[int, int], ...]
    var_y: dict[tuple[int, int], int]
    var_tau: dict[int, int]
    var_final: int
    nvars: int
    objective: np.ndarray
    static_rows: list[dict[int, float]]
    static_senses: list[str]
    static_rhs: list[float]
    static_names: list[str]
    lazy_rows: list[dict[int, float]]
    lazy_rhs: list[float]
    lazy_names: list[str]
    lazy_m: np.ndarray  # per-edge deactivation constant
    lo: np.ndarray
    hi: np.ndarray
    big_m: float
    increments: np.ndarray  # edge index -> d_ij + d_j (or return cost)
    return_to_depot: bool


@dataclass
class MilpSolution:
    status: str  # "optimal" | "infeasible" | "timeout"
    objective: float
    best_bound: float
    edges: tuple[tuple[int, int], ...]
    tau: dict[int, float]
    tau_final: float
    stats: dict = field(default_factory=dict)


def _edge_increment(tg: TourGraph, i: int, j: int) -> float:
    if tg.nodes[j].event is None:
        return float(tg.edge_cost[i, j]) if tg.return_to_depot else 0.0
    return float(tg.edge_cost[i, j] + tg.vertex_cost[j])


def _big_m(tg: TourGraph, increments: np.ndarray, robots: int) -> float:
    """An upper bound on any optimal time difference, derived from the
    longest path a feasible earliest schedule can realize: every travel
    increment at most once, every pair lower bound at most once, one
    absolute lower bound."""
    incs = np.sort(increments)[::-1]
    travel = float(incs[: len(tg.nodes) + robots + 1].sum())
    pair_lows = sum(lo for lo, _ in tg.pair_bounds.values() if lo < INF)
    abs_low = max((lo for lo, _ in tg.windows.values() if lo < INF), default=0.0)
    max_inc = float(incs[0]) if len(incs) else 0.0
    return travel + float(pair_lows) + float(abs_low) + max_inc + 1.0


def _completion_floors(tg: TourGraph) -> dict[int, float]:
    """Subset-level lower bounds on completion times.

    Min-plus relaxation from the depots over edge increments: the visited
    node of a subset cannot complete before the cheapest possible arrival at
    any of the subset's nodes, so the same floor is safe on every node of
    the subset (including the ones left unvisited)."""
    n = tg.num_nodes
    dist = [INF] * n
    for d in set(tg.depots):
        dist[d] = 0.0
    for _ in range(n):
        changed = False
        for i in range(n):
            if dist[i] == INF:
                continue
            row = tg.edge_cost[i]
            for j in range(n):
                c = row[j]
                if c == INF or tg.nodes[j].event is None:
                    continue
                cand = dist[i] + float(c + tg.vertex_cost[j])
                if cand < dist[j] - 1e-12:
                    dist[j] = cand
                    changed = True
        if not changed:
            break
    floors: dict[int, float] = {}
    for s in tg.subsets:
        if s.event is None:
            continue
        floor = min((dist[v] for v in s.nodes), default=0.0)
        if floor < INF:
            for v in s.nodes:
                floors[v] = floor
    return floors


def formulate(tg: TourGraph, robots: int) -> MilpModel:
    """Build the MILP for ``robots`` robots on the tour graph.

    Depot subsets take right-hand side equal to the number of robots based
    there, as an upper bound so that surplus robots may stay idle.  Raises
    ``NoFiniteEdgesError`` when an event subset cannot be entered or left.
    """
    depot_counts = tg.depot_robot_counts()
    depot_subsets = {tg.nodes[d].subset: cnt for d, cnt in depot_counts.items()}
    if robots < 1:
        raise ValueError("robot count must be >= 1")
    if robots != len(tg.depots):
        raise ValueError(
            f"tour graph carries {len(tg.depots)} robot depots, {robots} robots requested"
        )

    n = tg.num_nodes
    edges = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if tg.edge_cost[i, j] < INF
    ]
    var_y = {e: k for k, e in enumerate(edges)}
    var_tau = {node.id: len(edges) + node.id for node in tg.nodes}
    var_final = len(edges) + n
    nvars = var_final + 1

    increments = np.array([_edge_increment(tg, i, j) for i, j in edges])

    floors = _completion_floors(tg)
    lo = np.zeros(nvars)
    hi = np.ones(nvars)
    for node in tg.nodes:
        tv = var_tau[node.id]
        if node.event is None:
            lo[tv], hi[tv] = 0.0, 0.0  # time origin is anchored at the depots
        else:
            wlo, whi = tg.windows.get(node.subset, (0.0, INF))
            lo[tv] = max(wlo, floors.get(node.id, 0.0))
            hi[tv] = whi if whi < INF else np.inf
    lo[var_final], hi[var_final] = 0.0, np.inf

    objective = np.zeros(nvars)
    objective[var_final] = 1.0

    rows: list[dict[int, float]] = []
    senses: list[str] = []
    rhs: list[float] = []
    names: list[str] = []

    incoming: dict[int, list[int]] = {node.id: [] for node in tg.nodes}
    outgoing: dict[int, list[int]] = {node.id: [] for node in tg.nodes}
    for k, (i, j) in enumerate(edges):
        outgoing[i].append(k)
        incoming[j].append(k)

    for node in tg.nodes:
        row = {var_y[edges[k]]: 1.0 for k in incoming[node.id]}
        for k in outgoing[node.id]:
            row[var_y[edges[k]]] = row.get(var_y[edges[k]], 0.0) - 1.0
        rows.append(row)
        senses.append("=")
        rhs.append(0.0)
        names.append(f"flow_{node.id}")

    for s in tg.subsets:
        expected = depot_subsets.get(s.index)
        sense = "<=" if expected is not None else "="
        target = float(expected if expected is not None else 1)
        row_in = {}
        row_out = {}
        for node_id in s.nodes:
            for k in incoming[node_id]:
                row_in[var_y[edges[k]]] = 1.0
            for k in outgoing[node_id]:
                row_out[var_y[edges[k]]] = 1.0
        if not row_in and expected is None:
            raise NoFiniteEdgesError(s.event, "incoming")
        if not row_out and expected is None:
            raise NoFiniteEdgesError(s.event, "outgoing")
        rows.append(row_in)
        senses.append(sense)
        rhs.append(target)
        names.append(f"subin_{s.index}")
        rows.append(row_out)
        senses.append(sense)
        rhs.append(target)
        names.append(f"subout_{s.index}")

    for (sa, sb), (plo, phi) in sorted(tg.pair_bounds.items()):
        for ia in tg.subsets[sa].nodes:
            for ib in tg.subsets[sb].nodes:
                rows.append({var_tau[ib]: 1.0, var_tau[ia]: -1.0})
                senses.append(">=")
                rhs.append(plo)
                names.append(f"tpo_lo_{ia}_{ib}")
                if phi < INF:
                    rows.append({var_tau[ib]: 1.0, var_tau[ia]: -1.0})
                    senses.append("<=")
                    rhs.append(phi)
                    names.append(f"tpo_hi_{ia}_{ib}")

    # the makespan dominates every completion, and (telescoped over walks)
    # the total of enabled increments; both are implied for integer points
    # and sharpen the relaxation considerably
    for node in tg.nodes:
        if node.event is not None:
            rows.append({var_final: 1.0, var_tau[node.id]: -1.0})
            senses.append(">=")
            rhs.append(0.0)
            names.append(f"link_{node.id}")
    agg = {var_y[e]: float(increments[k]) for k, e in enumerate(edges)}
    agg[var_final] = -float(robots)
    rows.append(agg)
    senses.append("<=")
    rhs.append(0.0)
    names.append("agg")

    # arrival propagation that survives fractional edges: a node's in-degree
    # is at most one, so its completion is at least the floor plus whatever
    # the (fractionally) selected incoming edge adds over the floor
    for node in tg.nodes:
        if node.event is None:
            continue
        j = node.id
        fl = float(lo[var_tau[j]])
        row = {var_tau[j]: 1.0}
        for k in incoming[j]:
            i = edges[k][0]
            src_floor = 0.0 if tg.nodes[i].event is None else float(lo[var_tau[i]])
            lift = src_floor + float(increments[k]) - fl
            if lift > 1e-12:
                row[var_y[edges[k]]] = -lift
        rows.append(row)
        senses.append(">=")
        rhs.append(fl)
        names.append(f"arrive_{j}")
    for k, (i, j) in enumerate(edges):
        if tg.nodes[j].event is not None or tg.nodes[i].event is None:
            continue
        ret = float(tg.edge_cost[i, j]) if tg.return_to_depot else 0.0
        lift = float(lo[var_tau[i]]) + ret
        if lift > 1e-12:
            rows.append({var_final: 1.0, var_y[(i, j)]: -lift})
            senses.append(">=")
            rhs.append(0.0)
            names.append(f"close_{i}_{j}")

    big_m = _big_m(tg, increments, robots)
    lazy_rows: list[dict[int, float]] = []
    lazy_rhs: list[float] = []
    lazy_names: list[str] = []
    lazy_m: list[float] = []
    for k, (i, j) in enumerate(edges):
        inc = float(increments[k])
        if inc <= 0.0 and i != j:
            inc = _SUBTOUR_EPS
        cap_i = 0.0 if tg.nodes[i].event is None else min(float(hi[var_tau[i]]), big_m)
        if tg.nodes[j].event is None:
            ret = float(tg.edge_cost[i, j]) if tg.return_to_depot else 0.0
            m_row = cap_i + ret + 1.0
            row = {var_final: 1.0, var_tau[i]: -1.0, var_y[(i, j)]: -m_row}
            lazy_names.append(f"back_{i}_{j}")
            lazy_rhs.append(ret - m_row)
        else:
            m_row = max(1.0, cap_i - float(lo[var_tau[j]]) + inc + 1.0)
            row = {var_tau[j]: 1.0, var_tau[i]: -1.0, var_y[(i, j)]: -m_row}
            lazy_names.append(f"time_{i}_{j}")
            lazy_rhs.append(inc - m_row)
        lazy_rows.append(row)
        lazy_m.append(m_row)

    return MilpModel(
        tg=tg,
        robots=robots,
        edges=tuple(edges),
        var_y=var_y,
        var_tau=var_tau,
        var_final=var_final,
        nvars=nvars,
        objective=objective,
        static_rows=rows,
        static_senses=senses,
        static_rhs=rhs,
        static_names=names,
        lazy_rows=lazy_rows,
        lazy_rhs=lazy_rhs,
        lazy_names=lazy_names,
        lazy_m=np.array(lazy_m),
        lo=lo,
        hi=hi,
        big_m=big_m,
        increments=increments,
        return_to_depot=tg.return_to_depot,
    )


class _LpPool:
    """Static rows plus the monotonically growing set of active lazy rows.

    The assembled workspace is reused across bound-only re-solves and
    rebuilt whenever a lazy or blocking row joins the pool.
    """

    def __init__(self, model: MilpModel):
        self.model = model
        self.rows = list(model.static_rows)
        self.senses = list(model.static_senses)
        self.rhs = list(model.static_rhs)
        self.active = np.zeros(len(model.lazy_rows), dtype=bool)
        self.lp_iterations = 0
        self.start_high = None  # crash hint: binaries starting at 1
        self._workspace: LpWorkspace | None = None
        # edge arrays for fast violation checks
        m = model
        self.e_tau_i = np.array([m.var_tau[i] for i, _ in m.edges], dtype=np.int64)
        self.e_target = np.array(
            [m.var_final if m.tg.nodes[j].event is None else m.var_tau[j] for _, j in m.edges],
            dtype=np.int64,
        )
        self.e_y = np.arange(len(m.edges), dtype=np.int64)
        self.e_rhs = np.array(m.lazy_rhs)
        self.e_m = np.asarray(m.lazy_m)

    def activate_violated(self, x: np.ndarray) -> int:
        lhs = x[self.e_target] - x[self.e_tau_i] - self.e_m * x[self.e_y]
        violated = (lhs < self.e_rhs - 1e-7) & ~self.active
        idx = np.flatnonzero(violated)
        for k in idx:
            self.active[k] = True
            self.rows.append(self.model.lazy_rows[k])
            self.senses.append(">=")
            self.rhs.append(self.model.lazy_rhs[k])
        if len(idx):
            self._workspace = None
        return len(idx)

    def add_blocking_row(self, edge_vars: list[int]):
        self.rows.append({v: 1.0 for v in edge_vars})
        self.senses.append("<=")
        self.rhs.append(float(len(edge_vars) - 1))
        self._workspace = None

    def solve(self, lo, hi):
        if self._workspace is None:
            self._workspace = LpWorkspace(
                self.model.objective, self.rows, self.senses, self.rhs
            )
        res = self._workspace.solve(lo, hi, start_high=self.start_high)
        self.lp_iterations += res.iterations
        return res


def _solve_with_activation(pool: _LpPool, lo, hi, max_rounds=200):
    for _ in range(max_rounds):
        res = pool.solve(lo, hi)
        if res.status != OPTIMAL:
            return res
        if pool.activate_violated(res.x) == 0:
            return res
    raise NumericalFailureError("lazy row activation did not converge")


def _integral(x: np.ndarray, nedges: int) -> bool:
    y = x[:nedges]
    return bool(np.all(np.abs(y - np.round(y)) <= _INT_TOL))


def _walks_from_edges(tg: TourGraph, chosen: list[tuple[int, int]]):
    """Decompose chosen edges into maximal depot-to-depot paths.

    Interior nodes have degree exactly one, so the decomposition is unique;
    a walk may close at a depot other than its origin (callers decide
    whether that is legal).  Raises ``DisconnectedSelectionError`` on any
    leftover structure, for example a depot-free cycle."""
    out_map: dict[int, list[int]] = {}
    for i, j in chosen:
        out_map.setdefault(i, []).append(j)
    for i in out_map:
        out_map[i].sort()
    depot_ids = sorted(set(tg.depots))
    depot_set = set(depot_ids)
    walks = []
    used = 0
    for d in depot_ids:
        for first in out_map.get(d, []):
            walk = [d, first]
            used += 1
            cur = first
            while cur not in depot_set:
                nxts = out_map.get(cur, [])
                if len(nxts) != 1:
                    raise DisconnectedSelectionError(
                        f"node {cur} has out-degree {len(nxts)} along a walk"
                    )
                cur = nxts[0]
                walk.append(cur)
                used += 1
            walks.append(walk)
    if used != len(chosen):
        raise DisconnectedSelectionError(
            f"{len(chosen) - used} enabled edges form depot-free cycles"
        )
    visited_subsets = [tg.nodes[v].subset for w in walks for v in w[1:-1]]
    event_subsets = {s.index for s in tg.subsets if s.event is not None}
    if sorted(visited_subsets) != sorted(event_subsets):
        off = event_subsets.symmetric_difference(visited_subsets)
        raise DisconnectedSelectionError(
            f"walks do not cover every subset exactly once (subsets off: {sorted(off)})"
        )
    return walks


def _own_depot_violation(model: MilpModel, chosen) -> list[int] | None:
    """Return the edge-variable indices of a walk that closes at a foreign
    depot, or None.  Only meaningful when depot return is required."""
    walks = _walks_from_edges(model.tg, chosen)
    for walk in walks:
        if walk[0] != walk[-1]:
            return [model.var_y[(walk[k], walk[k + 1])] for k in range(len(walk) - 1)]
    return None


def _greedy_incumbent(model: MilpModel) -> list[tuple[int, int]] | None:
    """Nearest-feasible-neighbor construction used to seed the incumbent.

    Completion estimates respect window and pair lower bounds (waiting) and
    reject moves that break a finite upper bound against already-placed
    events; that keeps the construction feasible on most instances even
    though it never backtracks.
    """
    tg = model.tg
    closure_pred: dict[int, set[int]] = {}
    for (sa, sb) in tg.pair_bounds:
        closure_pred.setdefault(sb, set()).add(sa)
    remaining = {s.index for s in tg.subsets if s.event is not None}
    robot_pos = list(tg.depots)
    robot_time = [0.0] * len(tg.depots)
    placed_time: dict[int, float] = {}
    chosen: list[tuple[int, int]] = []
    while remaining:
        best = None
        for r, cur in enumerate(robot_pos):
            for s in sorted(remaining):
                if closure_pred.get(s, set()) & remaining:
                    continue  # an unvisited predecessor remains
                wlo, whi = tg.windows.get(s, (0.0, INF))
                for v in tg.subsets[s].nodes:
                    c = tg.edge_cost[cur, v]
                    if c == INF:
                        continue
                    completion = max(robot_time[r] + c + tg.vertex_cost[v], wlo)
                    for (sa, sb), (plo, phi) in tg.pair_bounds.items():
                        if sb == s and sa in placed_time:
                            completion = max(completion, placed_time[sa] + plo)
                    ok = completion <= whi + 1e-9
                    if ok:
                        for (sa, sb), (plo, phi) in tg.pair_bounds.items():
                            if phi == INF:
                                continue
                            if sb == s and sa in placed_time:
                                ok &= completion - placed_time[sa] <= phi + 1e-9
                            if sa == s and sb in placed_time:
                                ok &= placed_time[sb] - completion >= plo - 1e-9
                    if not ok:
                        continue
                    key = (completion, r, s, v)
                    if best is None or key < best:
                        best = key
        if best is None:
            return None
        completion, r, s, v = best
        chosen.append((robot_pos[r], v))
        robot_pos[r] = v
        robot_time[r] = completion
        placed_time[s] = completion
        remaining.discard(s)
    for r, cur in enumerate(robot_pos):
        depot = tg.depots[r]
        if cur != depot:
            if tg.edge_cost[cur, depot] == INF:
                return None
            chosen.append((cur, depot))
    return chosen


def solve(
    model: MilpModel,
    time_limit: float | None = None,
    node_limit: int | None = None,
    deterministic: bool = False,
) -> MilpSolution:
    """Branch and bound to a proven optimum (or a limit).

    Node selection is best-first by LP bound; after branching, the solver
    first dives into the child on the branching variable's rounded side so
    that incumbents (and with them reduced-cost fixing) arrive early.  In
    deterministic mode wall-clock limits are ignored so that repeated runs
    explore identical trees.  Returns a solution whose status is
    ``optimal``, ``infeasible``, or ``timeout`` (carrying the incumbent and
    the best proven bound).
    """
    t0 = _time.monotonic()
    pool = _LpPool(model)
    nedges = len(model.edges)
    require_own_depot = model.return_to_depot and len(set(model.tg.depots)) > 1
    base_lo, base_hi = model.lo.copy(), model.hi.copy()

    incumbent_obj = np.inf
    incumbent_x: np.ndarray | None = None
    root_res = None

    def apply_root_fixing():
        # binaries the root LP prices out against the incumbent are fixed
        # globally; sound because only solutions worse than the incumbent
        # are lost
        if root_res is None or root_res.dj is None:
            return
        cutoff = incumbent_obj - _OBJ_TOL
        yv = root_res.x[:nedges]
        dj = root_res.dj[:nedges]
        fix0 = (yv <= 1e-9) & (dj > 0) & (root_res.objective + dj >= cutoff)
        fix1 = (yv >= 1.0 - 1e-9) & (dj < 0) & (root_res.objective - dj >= cutoff)
        base_lo[:nedges][fix1] = 1.0
        base_hi[:nedges][fix0] = 0.0

    greedy = _greedy_incumbent(model)
    if greedy is not None:
        lo_g, hi_g = base_lo.copy(), base_hi.copy()
        lo_g[:nedges] = 0.0
        hi_g[:nedges] = 0.0
        for e in greedy:
            k = model.var_y[e]
            lo_g[k] = hi_g[k] = 1.0
        if not (require_own_depot and _own_depot_violation(model, greedy)):
            res = _solve_with_activation(pool, lo_g, hi_g)
            if res.status == OPTIMAL:
                incumbent_obj = res.objective
                incumbent_x = res.x.copy()

    nodes_done = 0
    counter = 0
    Node = tuple[float, int, int, tuple[tuple[int, float], ...]]
    heap: list[Node] = []
    stack: list[Node] = [(0.0, 0, 0, ())]

    def out_of_budget():
        if node_limit is not None and nodes_done >= node_limit:
            return True
        if time_limit is not None and not deterministic:
            return _time.monotonic() - t0 > time_limit
        return False

    status = "optimal"
    while stack or heap:
        if stack:
            bound, negdepth, _, fixes = stack.pop()
            if incumbent_x is not None and bound >= incumbent_obj - _OBJ_TOL:
                continue  # the dive was pruned by a newer incumbent
        else:
            bound, negdepth, _, fixes = heap[0]
            if incumbent_x is not None and bound >= incumbent_obj - _OBJ_TOL:
                break  # best-first: nothing left can improve
            heapq.heappop(heap)
        if out_of_budget():
            status = "timeout"
            break
        nodes_done += 1

        lo, hi = base_lo.copy(), base_hi.copy()
        for var, val in fixes:
            lo[var] = hi[var] = val

        res = _solve_with_activation(pool, lo, hi)
        if res.status == INFEASIBLE:
            continue
        if res.status != OPTIMAL:
            raise NumericalFailureError(f"node LP returned {res.status}")
        if incumbent_x is not None and res.objective >= incumbent_obj - _OBJ_TOL:
            continue
        if not fixes and root_res is None:
            root_res = res
            hint = np.zeros(model.nvars, dtype=bool)
            hint[:nedges] = res.x[:nedges] >= 0.5
            pool.start_high = hint  # crash later nodes near the root solution

        if incumbent_x is not None and res.dj is not None:
            # reduced-cost fixing: binaries whose move provably cannot beat
            # the incumbent are pinned for the whole subtree
            fixed_set = {var for var, _ in fixes}
            yv = res.x[:nedges]
            dj = res.dj[:nedges]
            cutoff = incumbent_obj - _OBJ_TOL
            fix0 = (yv <= 1e-9) & (dj > 0) & (res.objective + dj >= cutoff)
            fix1 = (yv >= 1.0 - 1e-9) & (dj < 0) & (res.objective - dj >= cutoff)
            extra = [(int(k), 0.0) for k in np.flatnonzero(fix0) if k not in fixed_set]
            extra += [(int(k), 1.0) for k in np.flatnonzero(fix1) if k not in fixed_set]
            if extra:
                fixes = fixes + tuple(extra)

        if _integral(res.x, nedges):
            snapped = np.round(res.x[:nedges])
            lo_f, hi_f = lo.copy(), hi.copy()
            lo_f[:nedges] = snapped
            hi_f[:nedges] = snapped
            fres = _solve_with_activation(pool, lo_f, hi_f)
            accept = fres.status == OPTIMAL
            if accept and require_own_depot:
                chosen = [model.edges[k] for k in np.flatnonzero(snapped > 0.5)]
                block = _own_depot_violation(model, chosen)
                if block is not None:
                    pool.add_blocking_row(block)
                    counter += 1
                    stack.append((bound, negdepth, counter, fixes))
                    continue
            if accept:
                if fres.objective < incumbent_obj - _OBJ_TOL:
                    incumbent_obj = fres.objective
                    incumbent_x = fres.x.copy()
                    apply_root_fixing()
                continue
            # big-M wiggle: the rounded point is not actually feasible;
            # force progress by branching on any unfixed edge
            fixed_vars = {var for var, _ in fixes}
            frac = [k for k in range(nedges) if k not in fixed_vars]
            if not frac:
                continue
            branch_var = frac[0]
        else:
            y = res.x[:nedges]
            dist = np.abs(y - 0.5)
            dist[np.abs(y - np.round(y)) <= _INT_TOL] = np.inf
            branch_var = int(np.argmin(dist))

        prefer = 1.0 if res.x[branch_var] >= 0.5 else 0.0
        counter += 1
        heapq.heappush(
            heap, (res.objective, negdepth - 1, counter, fixes + ((branch_var, 1.0 - prefer),))
        )
        counter += 1
        stack.append((res.objective, negdepth - 1, counter, fixes + ((branch_var, prefer),)))

    open_bounds = [b for b, *_ in heap] + [b for b, *_ in stack]
    if open_bounds:
        best_bound = min(open_bounds)
    else:
        best_bound = incumbent_obj if incumbent_x is not None else np.inf

    stats = {
        "nodes": nodes_done,
        "lp_iterations": pool.lp_iterations,
        "wall_time": _time.monotonic() - t0,
        "active_time_rows": int(pool.active.sum()),
    }
    if incumbent_x is None:
        final_status = "infeasible" if status == "optimal" else "timeout"
        return MilpSolution(
            status=final_status,
            objective=np.inf,
            best_bound=best_bound,
            edges=(),
            tau={},
            tau_final=np.inf,
            stats=stats,
        )
    chosen = [
        model.edges[k] for k in range(nedges) if incumbent_x[k] > 0.5
    ]
    tau = {node.id: float(incumbent_x[model.var_tau[node.id]]) for node in model.tg.nodes}
    return MilpSolution(
        status=status,
        objective=float(incumbent_obj),
        best_bound=float(min(best_bound, incumbent_obj)),
        edges=tuple(chosen),
        tau=tau,
        tau_final=float(incumbent_x[model.var_final]),
        stats=stats,
    )


def extract_tours(sol: MilpSolution, tg: TourGraph, robots: int) -> list[list[int]]:
    """Follow enabled edges from each depot into per-robot node tours.

    Walks are assigned to robots at their starting depot in robot-index
    order (earliest-starting walk first); surplus robots get a bare
    ``[depot]`` tour.  The closing depot is kept only when depot return is
    required.  Raises ``DisconnectedSelectionError`` when the selection does
    not decompose into depot-anchored walks covering every subset once.
    """
    walks = _walks_from_edges(tg, list(sol.edges))

    def walk_start_time(walk):
        if len(walk) <= 1:
            return (INF, walk[0])
        return (sol.tau.get(walk[1], INF), walk[1])

    by_depot: dict[int, list[list[int]]] = {}
    for walk in walks:
        by_depot.setdefault(walk[0], []).append(walk)
    for d in by_depot:
        by_depot[d].sort(key=walk_start_time)

    tours: list[list[int]] = []
    for r in range(robots):
        depot = tg.depots[r]
        queue = by_depot.get(depot, [])
        walk = queue.pop(0) if queue else [depot]
        if len(walk) > 1 and not tg.return_to_depot:
            walk = walk[:-1]
        tours.append(walk)
    leftovers = sum(len(q) for q in by_depot.values())
    if leftovers:
        raise DisconnectedSelectionError(f"{leftovers} walks exceed the robot count")
    return tours


def export_lp(model: MilpModel) -> str:
    """Serialize the full model (all time rows) in LP text format.

    Row order is: flow, subset degree, timing, makespan links, the aggregate
    row, then every time-propagation row in edge order; the order is stable
    for byte-level comparison and external cross-checks.
    """

    def vname(idx: int) -> str:
        if idx < len(model.edges):
            i, j = model.edges[idx]
            return f"y_{i}_{j}"
        if idx == model.var_final:
            return "t_end"
        node = idx - len(model.edges)
        return f"t_{node}"

    def term(coef: float, idx: int) -> str:
        sign = "+" if coef >= 0 else "-"
        mag = abs(coef)
        return f"{sign} {mag:.9g} {vname(idx)}"

    lines = ["\\ tour MILP export", "Minimize", " obj: + 1 t_end", "Subject To"]
    all_rows = list(
        zip(model.static_names, model.static_rows, model.static_senses, model.static_rhs)
    )
    all_rows += [
        (name, row, ">=", rhs)
        for name, row, rhs in zip(model.lazy_names, model.lazy_rows, model.lazy_rhs)
    ]
    for name, row, sense, rhs in all_rows:
        expr = " ".join(term(coef, idx) for idx, coef in sorted(row.items()))
        op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
        lines.append(f" {name}: {expr} {op} {rhs:.9g}")
    lines.append("Bounds")
    for idx in range(len(model.edges), model.nvars):
        lo, hi = model.lo[idx], model.hi[idx]
        hi_s = "+inf" if np.isposinf(hi) else f"{hi:.9g}"
        lines.append(f" {lo:.9g} <= {vname(idx)} <= {hi_s}")
    lines.append("Binaries")
    lines.append(" " + " ".join(vname(k) for k in range(len(model.edges))))
    lines.append("End")
    return "\n".join(lines) + "\n"
