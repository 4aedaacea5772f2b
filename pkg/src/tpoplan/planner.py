"""End-to-end pipeline: constraints -> tour graph -> MILP -> executable plans.

Tours from the solver are realized as gridworld plans by concatenating the
stored witness shortest paths and dwelling at event cells so that each event
completes exactly on schedule.  Completion times are recomputed exactly from
the chosen tours (earliest joint schedule), which keeps emitted traces
satisfying the constraints at tight tolerance instead of inheriting LP
round-off.  Multi-robot results are collision-checked and, on conflict,
repaired by integer start delays within the robustness margin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .dts import (
    MOVES,
    Plan,
    Trajectory,
    TransitionSystem,
    execute,
    induced_trace,
    non_colliding,
)
from .errors import (
    InconsistentSpecError,
    MilpInfeasibleError,
    NumericalFailureError,
    RepairFailedError,
    SolveLimitError,
)
from .gtsp import TourGraph, build_tour_graph
from .milp import MilpSolution, extract_tours, formulate, solve
from .robust import MarginReport, TourTiming, robustness
from .tpo import (
    INF,
    DiffConstraintSet,
    TimedTrace,
    TpoSpec,
    check_consistency,
    compile_tpo,
    satisfies,
)

_DELTA_TO_ACTION = {delta: action for action, delta in MOVES.items()}


@dataclass
class PlanResult:
    status: str  # "success" or "timeout" (feasible but unproven)
    plans: tuple[Plan, ...]
    trajectories: tuple[Trajectory, ...]
    event_times: TimedTrace
    makespan: float
    tours: list[list[int]]
    timings: list[TourTiming]
    margin: MarginReport
    solver: MilpSolution
    repaired: tuple[tuple[int, int], ...]
    tour_graph: TourGraph
    constraints: DiffConstraintSet


def _earliest_schedule(tg: TourGraph, tours: list[list[int]]) -> dict[int, float]:
    """Exact earliest completion times for fixed tours.

    Iterates lower-bound arcs (travel chains, pair bounds, windows) to a
    fixpoint; upper bounds hold automatically at the earliest point because
    the system is known feasible.
    """
    times: dict[int, float] = {}
    visited_subset: dict[int, int] = {}
    for tour in tours:
        for v in tour:
            if tg.nodes[v].event is not None:
                times[v] = 0.0
                visited_subset[tg.nodes[v].subset] = v

    chain_arcs: list[tuple[int | None, int, float]] = []
    for tour in tours:
        prev: int | None = None
        for v in tour[1:]:
            if tg.nodes[v].event is None:
                continue
            inc = float(tg.edge_cost[tour[0] if prev is None else prev, v] + tg.vertex_cost[v])
            chain_arcs.append((prev, v, inc))
            prev = v
    pair_arcs = [
        (visited_subset[sa], visited_subset[sb], lo)
        for (sa, sb), (lo, _) in tg.pair_bounds.items()
        if sa in visited_subset and sb in visited_subset
    ]
    window_lows = {
        visited_subset[s]: lo for s, (lo, _) in tg.windows.items() if s in visited_subset
    }

    for v, lo in window_lows.items():
        times[v] = max(times[v], lo)
    for _ in range(len(times) + 2):
        changed = False
        for u, v, inc in chain_arcs:
            base = 0.0 if u is None else times[u]
            if base + inc > times[v] + 1e-12:
                times[v] = base + inc
                changed = True
        for u, v, lo in pair_arcs:
            if times[u] + lo > times[v] + 1e-12:
                times[v] = times[u] + lo
                changed = True
        if not changed:
            return times
    raise NumericalFailureError("earliest-schedule relaxation did not settle")


def _path_actions(ts: TransitionSystem, path) -> list[str]:
    actions = []
    for a, b in zip(path, path[1:]):
        delta = (b[0] - a[0], b[1] - a[1])
        action = _DELTA_TO_ACTION.get(delta)
        if action is None:
            raise NumericalFailureError(f"witness path steps {a} -> {b} non-adjacent")
        actions.append(action)
    return actions


def _realize(
    ts: TransitionSystem,
    tg: TourGraph,
    tours: list[list[int]],
    schedule: dict[int, float],
    start_delays: dict[int, int] | None = None,
) -> tuple[tuple[Plan, ...], tuple[Trajectory, ...], list[TourTiming]]:
    start_delays = start_delays or {}
    plans: list[Plan] = []
    trajectories: list[Trajectory] = []
    timings: list[TourTiming] = []
    for r, tour in enumerate(tours):
        delay = float(start_delays.get(r, 0))
        actions: list = []
        cursor = delay
        timing_nodes = [tour[0]]
        timing_events: list[str | None] = [None]
        timing_times = [0.0]  # the depot anchors each robot's time origin
        for u, v in zip(tour, tour[1:]):
            for action in _path_actions(ts, tg.edge_paths[(u, v)]):
                actions.append(action)
                cursor += ts.duration(action)
            if tg.nodes[v].event is not None:
                target = schedule[v] + delay
                dwell = target - cursor
                if dwell < -1e-6:
                    raise NumericalFailureError(
                        f"schedule for node {v} precedes arrival by {-dwell}"
                    )
                if dwell > 1e-12:
                    actions.append(("wait", dwell))
                    cursor = target
            timing_nodes.append(v)
            timing_events.append(tg.nodes[v].event)
            timing_times.append(cursor)
        plan = Plan(actions=tuple(actions), robot_index=r, start_delay=delay)
        traj = execute(ts, plan)
        plans.append(plan)
        trajectories.append(traj)
        timings.append(
            TourTiming(
                nodes=tuple(timing_nodes),
                events=tuple(timing_events),
                times=tuple(timing_times),
            )
        )
    return tuple(plans), tuple(trajectories), timings


def plan(
    ts: TransitionSystem,
    spec: TpoSpec | DiffConstraintSet,
    *,
    service: dict[str, float] | None = None,
    return_to_depot: bool = False,
    time_limit: float | None = None,
    node_limit: int | None = None,
    deterministic: bool = False,
    repair_priority: tuple[int, ...] | None = None,
) -> PlanResult:
    """Synthesize minimum-makespan plans for every robot in the system.

    Raises ``InconsistentSpecError`` when the timing constraints admit no
    trace, ``MilpInfeasibleError`` when the tour problem has no solution,
    ``SolveLimitError`` when limits ran out before any incumbent, and
    ``RepairFailedError`` when collisions cannot be delayed away.
    """
    dcs = compile_tpo(spec) if isinstance(spec, TpoSpec) else spec
    report = check_consistency(dcs)
    if not report.consistent:
        raise InconsistentSpecError(report.negative_cycle)
    tightened = report.tightened

    robots = len(ts.initial_states)
    tg = build_tour_graph(ts, tightened, service=service, return_to_depot=return_to_depot)
    model = formulate(tg, robots)
    sol = solve(
        model, time_limit=time_limit, node_limit=node_limit, deterministic=deterministic
    )
    if sol.status == "infeasible":
        raise MilpInfeasibleError("no tour satisfies the timing constraints")
    if sol.status == "timeout" and not sol.edges:
        raise SolveLimitError(sol)

    tours = extract_tours(sol, tg, robots)
    schedule = _earliest_schedule(tg, tours)
    plans, trajectories, timings = _realize(ts, tg, tours, schedule)

    event_times = induced_trace(ts, *trajectories)
    verdict = satisfies(event_times, dcs)
    if not verdict.ok:
        raise NumericalFailureError(
            f"realized trace violates the constraints: {verdict.violations[:3]}"
        )

    makespan = max((t.duration for t in trajectories), default=0.0)
    margin = robustness(timings, dcs)
    result = PlanResult(
        status="success" if sol.status == "optimal" else "timeout",
        plans=plans,
        trajectories=trajectories,
        event_times=event_times,
        makespan=makespan,
        tours=tours,
        timings=timings,
        margin=margin,
        solver=sol,
        repaired=(),
        tour_graph=tg,
        constraints=dcs,
    )
    if robots >= 2:
        collision = non_colliding(list(trajectories))
        if not collision.ok:
            result = repair(ts, result, priority=repair_priority)
    return result


def repair(
    ts: TransitionSystem,
    result: PlanResult,
    priority: tuple[int, ...] | None = None,
) -> PlanResult:
    """Resolve collisions by integer start delays within the margin.

    The lower-priority robot of the earliest conflict is delayed one time
    unit at a time (priority defaults to robot index, lower index wins).
    Every trial revalidates both the collision predicate and the timing
    constraints; the delay budget is the robustness margin.
    """
    robots = len(result.tours)
    order = list(priority) if priority is not None else list(range(robots))
    if sorted(order) != list(range(robots)):
        raise ValueError(f"priority must permute robot indices, got {priority}")
    rank = {robot: pos for pos, robot in enumerate(order)}

    eps = result.margin.epsilon
    serial_cap = int(sum(t.duration for t in result.trajectories)) + robots + 1
    budget = serial_cap if eps == INF else int(eps)

    tg = result.tour_graph
    schedule = _earliest_schedule(tg, result.tours)
    delays: dict[int, int] = {}
    for _ in range(robots * (budget + 1) + 1):
        plans, trajectories, timings = _realize(
            ts, tg, result.tours, schedule, start_delays=delays
        )
        collision = non_colliding(list(trajectories))
        if collision.ok:
            event_times = induced_trace(ts, *trajectories)
            if not satisfies(event_times, result.constraints).ok:
                raise RepairFailedError(
                    f"delays {delays} resolve collisions but violate the timing constraints"
                )
            makespan = max(t.duration for t in trajectories)
            return replace(
                result,
                plans=plans,
                trajectories=trajectories,
                event_times=event_times,
                makespan=makespan,
                timings=timings,
                margin=robustness(timings, result.constraints),
                repaired=tuple(sorted(delays.items())),
            )
        a, b = collision.conflict.robots
        victim = a if rank[a] > rank[b] else b
        delays[victim] = delays.get(victim, 0) + 1
        if delays[victim] > budget:
            raise RepairFailedError(
                f"robot {victim} exhausted the delay budget ({budget}) at "
                f"conflict {collision.conflict}"
            )
    raise RepairFailedError("delay repair did not converge")
