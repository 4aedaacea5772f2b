"""Random instances and the scaling benchmark sweep.

Instances are feasible by construction: events are laid out on the grid, a
uniform random topological order fixes a nominal tour, the precedence DAG
draws forward pairs of that order, and relative timing windows are attached
only where the nominal tour already sits inside the padded window.  The
sweep then times the exact solver cell by cell and reports a tab-separated
table plus a log-scale chart.
"""

from __future__ import annotations

import random
import time as _time
from dataclasses import dataclass, replace

from .dts import TransitionSystem
from .errors import PlanningError
from .gtsp import TourGraph, build_tour_graph
from .milp import formulate, solve
from .tpo import INF, check_consistency, raw_constraints


@dataclass(frozen=True)
class BenchConfig:
    node_counts: tuple[int, ...] = (5, 10, 20, 40, 80, 160)
    robot_counts: tuple[int, ...] = (1, 10, 20, 30, 40)
    constraint_fractions: tuple[float, ...] = (0.25,)
    paddings: tuple[float, ...] = (30.0,)
    grid: tuple[int, int] = (30, 30)
    timeout: float = 600.0
    seed: int = 0
    deterministic: bool = False

    def __post_init__(self):
        if self.timeout <= 0 or self.seed < 0:
            raise ValueError("timeout must be positive and seed non-negative")
        for group in (self.node_counts, self.robot_counts, self.constraint_fractions, self.paddings):
            if any(v <= 0 for v in group):
                raise ValueError("all sweep values must be positive")


@dataclass
class BenchRow:
    nodes: int
    robots: int
    fraction: float
    padding: float
    seed: int
    status: str
    objective: float
    seconds: float
    bb_nodes: int


def _sample_cells(rng: random.Random, grid, count):
    width, height = grid
    cells = [(x, y) for x in range(width) for y in range(height)]
    return rng.sample(cells, count)


def _random_dag(rng: random.Random, events):
    """Uniform random topological order; forward pairs kept with prob 2/n."""
    order = list(events)
    rng.shuffle(order)
    n = max(len(order), 1)
    edges = []
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if rng.random() < 2.0 / n:
                edges.append((order[i], order[j]))
    return order, edges


def random_tour_graph(
    num_events: int,
    robots: int,
    fraction: float,
    padding: float,
    grid=(30, 30),
    seed: int = 0,
) -> TourGraph:
    """A benchmark instance: one depot shared by all robots, one cell per
    event, and padded relative windows on a fraction of the DAG edges."""
    for attempt in range(64):
        rng = random.Random(seed * 1000 + attempt)
        cells = _sample_cells(rng, grid, num_events + 1)
        depot, event_cells = cells[0], cells[1:]
        events = [f"e{k}" for k in range(num_events)]
        ts = TransitionSystem(
            width=grid[0],
            height=grid[1],
            walls=frozenset(),
            initial_states=(depot,),
            labels={cell: ev for ev, cell in zip(events, event_cells)},
        )
        order, dag_edges = _random_dag(rng, events)
        base = raw_constraints(events, [(a, b, 0.0, None) for a, b in dag_edges])
        tg = build_tour_graph(ts, base)

        node_of = {n.event: n.id for n in tg.nodes if n.event is not None}
        nominal = {}
        t = 0.0
        prev_id = tg.depots[0]
        feasible = True
        for ev in order:
            leg = tg.edge_cost[prev_id, node_of[ev]]
            if leg == INF:
                feasible = False
                break
            t += float(leg)
            nominal[ev] = t
            prev_id = node_of[ev]
        if not feasible:
            continue

        # attach windows only where the nominal tour fits the padded bound
        pairs = [(a, b, 0.0, None) for a, b in dag_edges]
        eligible = []
        for a, b in dag_edges:
            direct = tg.edge_cost[node_of[a], node_of[b]]
            if direct == INF:
                continue
            lo = max(0.0, float(direct) - padding)
            hi = float(direct) + padding
            if lo - 1e-9 <= nominal[b] - nominal[a] <= hi + 1e-9:
                eligible.append((a, b, lo, hi))
        rng.shuffle(eligible)
        want = round(fraction * len(dag_edges))
        pairs.extend(eligible[:want])

        dcs = raw_constraints(events, pairs)
        if not check_consistency(dcs).consistent:
            continue
        tg = build_tour_graph(ts, dcs)
        return replace(tg, depots=(tg.depots[0],) * robots)
    raise PlanningError(f"could not generate a feasible instance for seed {seed}")


def random_scenario_text(
    seed: int,
    grid=(10, 10),
    max_events: int = 8,
    max_nodes_per_subset: int = 2,
    robots: int = 2,
    padding: float = 6.0,
    fraction: float = 0.6,
) -> str:
    """Scenario JSON for the oracle-equivalence corpus.

    Distinct robot starts, one or two candidate cells per event, a sprinkle
    of walls, and raw constraints padded around a nominal tour so the
    instance is guaranteed solvable.
    """
    import json

    for attempt in range(64):
        rng = random.Random(seed * 1000 + attempt)
        width, height = grid
        n_events = rng.randint(2, max_events)
        counts = [rng.randint(1, max_nodes_per_subset) for _ in range(n_events)]
        while sum(counts) > 10:  # stay inside the brute-force guard
            counts[counts.index(max(counts))] -= 1
        total_cells = sum(counts) + robots + rng.randint(0, 4)
        all_cells = _sample_cells(rng, grid, total_cells)
        starts = all_cells[:robots]
        pool = all_cells[robots:]
        walls = tuple(pool[sum(counts):])
        events = {}
        k = 0
        for idx, cnt in enumerate(counts):
            events[f"e{idx}"] = [list(c) for c in pool[k: k + cnt]]
            k += cnt

        ts = TransitionSystem(
            width=width,
            height=height,
            walls=frozenset(walls),
            initial_states=tuple(starts),
            labels={tuple(c): ev for ev, cells in events.items() for c in cells},
        )
        names = list(events.keys())
        order, dag_edges = _random_dag(rng, names)
        base = raw_constraints(names, [(a, b, 0.0, None) for a, b in dag_edges])
        try:
            tg = build_tour_graph(ts, base)
        except PlanningError:
            continue

        node_of = {}
        for node in tg.nodes:
            if node.event is not None and node.event not in node_of:
                node_of[node.event] = node.id
        nominal = {}
        t = 0.0
        prev_id = tg.depots[0]
        feasible = True
        for ev in order:
            leg = tg.edge_cost[prev_id, node_of[ev]]
            if leg == INF:
                feasible = False
                break
            t += float(leg)
            nominal[ev] = t
            prev_id = node_of[ev]
        if not feasible:
            continue

        pairs = [[a, b, 0.0, None] for a, b in dag_edges]
        for a, b in dag_edges:
            if rng.random() < fraction:
                diff = nominal[b] - nominal[a]
                pairs.append([a, b, max(0.0, diff - padding), diff + padding])
        absolute = []
        for ev in rng.sample(names, k=min(2, len(names))):
            if rng.random() < 0.7:
                absolute.append([ev, max(0.0, nominal[ev] - padding), nominal[ev] + padding])

        doc = {
            "grid": {"width": width, "height": height, "walls": [list(w) for w in walls]},
            "robots": [list(s) for s in starts],
            "events": events,
            "constraints": {"pairs": pairs, "absolute": absolute},
            "options": {"name": f"random-{seed}"},
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        dcs = raw_constraints(
            names,
            [(a, b, lo, hi) for a, b, lo, hi in pairs],
            [(ev, lo, hi) for ev, lo, hi in absolute],
        )
        if check_consistency(dcs).consistent:
            return text
    raise PlanningError(f"could not generate a feasible scenario for seed {seed}")


def run_cell(
    nodes: int,
    robots: int,
    fraction: float,
    padding: float,
    config: BenchConfig,
    seed: int,
) -> BenchRow:
    tg = random_tour_graph(nodes, robots, fraction, padding, config.grid, seed)
    model = formulate(tg, robots)
    t0 = _time.monotonic()
    sol = solve(
        model,
        time_limit=config.timeout,
        deterministic=config.deterministic,
    )
    elapsed = _time.monotonic() - t0
    return BenchRow(
        nodes=nodes,
        robots=robots,
        fraction=fraction,
        padding=padding,
        seed=seed,
        status=sol.status,
        objective=sol.objective,
        seconds=elapsed,
        bb_nodes=sol.stats.get("nodes", 0),
    )


def run_bench(config: BenchConfig, log=None) -> list[BenchRow]:
    """Full sweep in config-cell order; partial rows survive interruption."""
    rows: list[BenchRow] = []
    try:
        for nodes in config.node_counts:
            for fraction in config.constraint_fractions:
                for padding in config.paddings:
                    for robots in config.robot_counts:
                        row = run_cell(nodes, robots, fraction, padding, config, config.seed)
                        rows.append(row)
                        if log:
                            log(format_row(row))
    except KeyboardInterrupt:
        if log:
            log("# interrupted; partial results kept")
    return rows


_HEADER = "nodes\trobots\tfraction\tpadding\tseed\tstatus\tobjective\tseconds\tbb_nodes"


def format_row(row: BenchRow) -> str:
    obj = "inf" if row.objective == INF else f"{row.objective:.6f}"
    return (
        f"{row.nodes}\t{row.robots}\t{row.fraction:g}\t{row.padding:g}\t{row.seed}"
        f"\t{row.status}\t{obj}\t{row.seconds:.3f}\t{row.bb_nodes}"
    )


def format_table(rows: list[BenchRow]) -> str:
    return "\n".join([_HEADER] + [format_row(r) for r in rows]) + "\n"
