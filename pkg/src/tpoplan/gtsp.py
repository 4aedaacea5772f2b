"""Tour-graph construction: reduce gridworld + timing constraints to a
generalized TSP with time windows and precedence.

Nodes are the robot start cells (depots) plus every labeled cell; nodes with
the same label form one subset and the tour must visit exactly one node per
subset.  Edge costs are shortest-path travel times whose interior avoids all
labeled cells, so traversing an edge triggers no event en route.  Edges that
would visit a successor before its predecessor are inadmissible and excluded
from the model outright.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .dts import Cell, TransitionSystem
from .errors import UnreachableEventError, UnrealizableEventError
from .tpo import DiffConstraintSet, INF


@dataclass(frozen=True)
class TourNode:
    id: int
    cell: Cell
    subset: int
    event: str | None  # None for depots


@dataclass(frozen=True)
class TourSubset:
    index: int
    event: str | None
    nodes: tuple[int, ...]


@dataclass
class TourGraph:
    nodes: tuple[TourNode, ...]
    subsets: tuple[TourSubset, ...]
    depots: tuple[int, ...]            # depot node id per robot, robot order
    edge_cost: np.ndarray              # (N, N), inf where inadmissible
    vertex_cost: np.ndarray            # (N,), service delay per node
    windows: dict[int, tuple[float, float]]                 # subset -> [a, b]
    pair_bounds: dict[tuple[int, int], tuple[float, float]]  # (si, sj) -> [lo, hi]
    edge_paths: dict[tuple[int, int], tuple[Cell, ...]] = field(default_factory=dict)
    return_to_depot: bool = False

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def event_of_subset(self, index: int) -> str | None:
        return self.subsets[index].event

    def depot_robot_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for d in self.depots:
            counts[d] = counts.get(d, 0) + 1
        return counts


def all_pairs_shortest(
    ts: TransitionSystem, poi: set[Cell]
) -> tuple[dict[tuple[Cell, Cell], float], dict[tuple[Cell, Cell], tuple[Cell, ...]]]:
    """Shortest travel times between points of interest, with witness paths.

    Runs one Dijkstra per source over the grid.  Labeled cells other than
    the source are absorbing: a path may end on one but never pass through,
    which guarantees each witness path's interior observes no event.
    Unreachable pairs get cost ``inf``.
    """
    cost: dict[tuple[Cell, Cell], float] = {}
    paths: dict[tuple[Cell, Cell], tuple[Cell, ...]] = {}
    targets = set(poi)
    for source in sorted(targets):
        dist: dict[Cell, float] = {source: 0.0}
        parent: dict[Cell, Cell] = {}
        heap: list[tuple[float, Cell]] = [(0.0, source)]
        while heap:
            d, cell = heapq.heappop(heap)
            if d > dist.get(cell, INF):
                continue
            if cell != source and cell in ts.labels:
                continue  # absorbing: no transit through labeled cells
            for _, nxt, dur in ts.neighbors(cell):
                nd = d + dur
                if nd < dist.get(nxt, INF) - 1e-12:
                    dist[nxt] = nd
                    parent[nxt] = cell
                    heapq.heappush(heap, (nd, nxt))
        for target in sorted(targets):
            if target == source:
                continue
            if target not in dist:
                cost[(source, target)] = INF
                continue
            cost[(source, target)] = dist[target]
            back = [target]
            while back[-1] != source:
                back.append(parent[back[-1]])
            paths[(source, target)] = tuple(reversed(back))
    return cost, paths


def _grid_reachable(ts: TransitionSystem, sources) -> set[Cell]:
    """Plain flood fill ignoring labels (used for the reachability guard)."""
    seen = set(sources)
    stack = list(sources)
    while stack:
        cur = stack.pop()
        for _, nxt, _ in ts.neighbors(cur):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def build_tour_graph(
    ts: TransitionSystem,
    dcs: DiffConstraintSet,
    service: dict[str, float] | None = None,
    return_to_depot: bool = False,
) -> TourGraph:
    """Abstract a transition system plus difference bounds into a tour graph.

    Every event must label at least one state (``UnrealizableEventError``)
    and have at least one labeled cell inside the robots' connected region
    (``UnreachableEventError``).  An edge from node u to node v is admissible
    unless v's event strictly precedes u's in the constraint closure, or the
    two nodes share a subset, or no interior-silent path connects them.
    """
    service = service or {}
    labeled: dict[str, list[Cell]] = {e: [] for e in dcs.events}
    for cell in sorted(ts.labels):
        event = ts.labels[cell]
        if event in labeled:
            labeled[event].append(cell)
    for event in dcs.events:
        if not labeled[event]:
            raise UnrealizableEventError(event)

    reachable = _grid_reachable(ts, ts.initial_states)
    for event in dcs.events:
        if not any(cell in reachable for cell in labeled[event]):
            raise UnreachableEventError(event)

    # depot node per distinct start cell, in robot order
    nodes: list[TourNode] = []
    subsets: list[TourSubset] = []
    depot_by_cell: dict[Cell, int] = {}
    depots: list[int] = []
    for start in ts.initial_states:
        if start not in depot_by_cell:
            node_id = len(nodes)
            subset_id = len(subsets)
            nodes.append(TourNode(id=node_id, cell=start, subset=subset_id, event=None))
            subsets.append(TourSubset(index=subset_id, event=None, nodes=(node_id,)))
            depot_by_cell[start] = node_id
        depots.append(depot_by_cell[start])

    subset_of_event: dict[str, int] = {}
    for event in dcs.events:
        subset_id = len(subsets)
        ids = []
        for cell in labeled[event]:
            node_id = len(nodes)
            nodes.append(TourNode(id=node_id, cell=cell, subset=subset_id, event=event))
            ids.append(node_id)
        subsets.append(TourSubset(index=subset_id, event=event, nodes=tuple(ids)))
        subset_of_event[event] = subset_id

    poi = {n.cell for n in nodes}
    cost, paths = all_pairs_shortest(ts, poi)

    closure = dcs.precedence_closure()
    n = len(nodes)
    edge_cost = np.full((n, n), INF)
    edge_paths: dict[tuple[int, int], tuple[Cell, ...]] = {}
    for u in nodes:
        for v in nodes:
            if u.id == v.id or u.subset == v.subset:
                continue
            if u.event is None and v.event is None:
                continue  # depot-to-depot travel is never useful
            if u.event is not None and v.event is not None:
                if (v.event, u.event) in closure:
                    continue  # v must happen strictly before u
            c = cost.get((u.cell, v.cell), INF)
            if c == INF:
                continue
            edge_cost[u.id, v.id] = c
            edge_paths[(u.id, v.id)] = paths[(u.cell, v.cell)]

    vertex_cost = np.zeros(n)
    for node in nodes:
        if node.event is not None:
            vertex_cost[node.id] = float(service.get(node.event, 0.0))

    windows = {}
    pair_bounds = {}
    for event, (lo, hi) in dcs.abs_bounds.items():
        windows[subset_of_event[event]] = (lo, hi)
    for (a, b), (lo, hi) in dcs.pair_bounds.items():
        pair_bounds[(subset_of_event[a], subset_of_event[b])] = (lo, hi)

    return TourGraph(
        nodes=tuple(nodes),
        subsets=tuple(subsets),
        depots=tuple(depots),
        edge_cost=edge_cost,
        vertex_cost=vertex_cost,
        windows=windows,
        pair_bounds=pair_bounds,
        edge_paths=edge_paths,
        return_to_depot=return_to_depot,
    )


def dump_tour_graph(tg: TourGraph) -> str:
    """Stable plain-text dump of the instance for golden-file comparison."""
    out = []
    out.append(
        f"tour-graph nodes={tg.num_nodes} subsets={len(tg.subsets)} "
        f"depots={len(set(tg.depots))} return={int(tg.return_to_depot)}"
    )
    for s in tg.subsets:
        tag = "depot" if s.event is None else f"event={s.event}"
        out.append(f"subset {s.index} {tag} nodes={list(s.nodes)}")
    for node in tg.nodes:
        tag = "depot" if node.event is None else node.event
        out.append(
            f"node {node.id} {tag} cell=({node.cell[0]},{node.cell[1]}) "
            f"service={tg.vertex_cost[node.id]:.3f}"
        )
    out.append("edges")
    header = "      " + "".join(f"{j:>8d}" for j in range(tg.num_nodes))
    out.append(header)
    for i in range(tg.num_nodes):
        row = [f"{i:>6d}"]
        for j in range(tg.num_nodes):
            c = tg.edge_cost[i, j]
            row.append("     inf" if c == INF else f"{c:8.2f}")
        out.append("".join(row))
    out.append("windows")
    for index in sorted(tg.windows):
        lo, hi = tg.windows[index]
        hi_s = "inf" if hi == INF else f"{hi:.3f}"
        out.append(f"subset {index} [{lo:.3f}, {hi_s}]")
    out.append("pairs")
    for (a, b) in sorted(tg.pair_bounds):
        lo, hi = tg.pair_bounds[(a, b)]
        hi_s = "inf" if hi == INF else f"{hi:.3f}"
        out.append(f"{a}->{b} [{lo:.3f}, {hi_s}]")
    return "\n".join(out) + "\n"
