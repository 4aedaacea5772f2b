"""Gridworld transition systems: plans, trajectories, induced traces, collisions.

States are grid cells ``(x, y)``; moves are the four compass actions plus an
in-place wait.  Each transition carries a strictly positive duration, so a
trajectory is a piecewise-constant function of time: the robot stays in a
cell for the whole step duration and appears in the destination exactly at
the step's completion time (right-continuous convention).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .errors import InvalidPlanError, MalformedScenarioError
from .tpo import TimedTrace

Cell = tuple[int, int]

MOVES: dict[str, tuple[int, int]] = {
    "up": (0, 1),
    "down": (0, -1),
    "left": (-1, 0),
    "right": (1, 0),
}
WAIT = "wait"

#: a plan step: a move name, or ("wait", duration) for an explicit dwell
PlanStep = str | tuple[str, float]


@dataclass(frozen=True)
class TransitionSystem:
    width: int
    height: int
    walls: frozenset[Cell]
    initial_states: tuple[Cell, ...]
    labels: dict[Cell, str]
    move_durations: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MalformedScenarioError("grid dimensions must be positive")
        for cell in self.initial_states:
            if not self.in_bounds(cell) or cell in self.walls:
                raise MalformedScenarioError(f"initial state {cell} out of bounds or on a wall")
            if cell in self.labels:
                raise MalformedScenarioError(f"initial state {cell} must be unlabeled")
        if len(set(self.initial_states)) != len(self.initial_states):
            raise MalformedScenarioError("robots must start on distinct cells")
        for cell, event in self.labels.items():
            if not self.in_bounds(cell) or cell in self.walls:
                raise MalformedScenarioError(
                    f"labeled cell {cell} ({event!r}) out of bounds or on a wall"
                )
        for action, dur in self.move_durations.items():
            if dur <= 0:
                raise MalformedScenarioError(f"duration for {action!r} must be positive")

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def duration(self, action: str) -> float:
        return self.move_durations.get(action, 1.0)

    def step(self, cell: Cell, action: str) -> tuple[Cell, float] | None:
        """Apply one action; None when the transition is undefined."""
        if action == WAIT:
            return cell, self.duration(WAIT)
        delta = MOVES.get(action)
        if delta is None:
            return None
        nxt = (cell[0] + delta[0], cell[1] + delta[1])
        if not self.in_bounds(nxt) or nxt in self.walls:
            return None
        return nxt, self.duration(action)

    def neighbors(self, cell: Cell):
        for action in ("up", "down", "left", "right"):
            res = self.step(cell, action)
            if res is not None:
                yield action, res[0], res[1]


@dataclass(frozen=True)
class Plan:
    """A sequence of actions for one robot, optionally delayed at the start."""

    actions: tuple[PlanStep, ...]
    robot_index: int = 0
    start_delay: float = 0.0

    def __post_init__(self):
        if self.start_delay < 0:
            raise MalformedScenarioError("start delay must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Visited states with cumulative completion timestamps.

    ``times[0]`` equals the plan's start delay; ``times[i+1] - times[i]`` is
    the duration of step ``i``.  The robot occupies ``states[i]`` during
    ``[times[i], times[i+1])`` and parks at the final state forever.
    """

    states: tuple[Cell, ...]
    times: tuple[float, ...]
    robot_index: int = 0

    @property
    def duration(self) -> float:
        return self.times[-1]

    def state_at(self, t: float) -> Cell:
        if t < self.times[0]:
            return self.states[0]
        i = bisect.bisect_right(self.times, t) - 1
        return self.states[min(i, len(self.states) - 1)]


def execute(ts: TransitionSystem, plan: Plan) -> Trajectory:
    """Run a plan from its robot's initial state.

    Raises ``InvalidPlanError`` with the offending step index when a move is
    undefined at the state reached so far.
    """
    if plan.robot_index >= len(ts.initial_states):
        raise InvalidPlanError(-1)
    cur = ts.initial_states[plan.robot_index]
    states = [cur]
    times = [float(plan.start_delay)]
    for i, step in enumerate(plan.actions):
        if isinstance(step, tuple):
            action, dur = step
            if action != WAIT or dur <= 0:
                raise InvalidPlanError(i)
            nxt = cur
        else:
            res = ts.step(cur, step)
            if res is None:
                raise InvalidPlanError(i)
            nxt, dur = res
        cur = nxt
        states.append(cur)
        times.append(times[-1] + dur)
    return Trajectory(states=tuple(states), times=tuple(times), robot_index=plan.robot_index)


def state_at(traj: Trajectory, t: float) -> Cell:
    return traj.state_at(t)


def induced_trace(ts: TransitionSystem, *trajectories: Trajectory) -> TimedTrace:
    """Timed trace induced by trajectories: label -> visit completion time.

    Consecutive repetitions of a labeled state (waits at the cell) collapse
    to a single occurrence stamped with the end of the dwell.  If a label is
    visited in several separate runs, the last run wins.
    """
    entries: dict[str, float] = {}
    for traj in trajectories:
        i = 0
        n = len(traj.states)
        while i < n:
            j = i
            while j + 1 < n and traj.states[j + 1] == traj.states[i]:
                j += 1
            event = ts.labels.get(traj.states[i])
            if event is not None:
                entries[event] = traj.times[j]
            i = j + 1
    return TimedTrace(entries=entries)


@dataclass(frozen=True)
class Conflict:
    time: float
    cell: Cell
    robots: tuple[int, int]


def _pair_conflict(a: Trajectory, b: Trajectory) -> Conflict | None:
    horizon = max(a.duration, b.duration)
    bounds = sorted({t for t in a.times + b.times if t <= horizon} | {horizon})
    samples: list[float] = []
    for i, t in enumerate(bounds):
        samples.append(t)
        if i + 1 < len(bounds):
            samples.append((t + bounds[i + 1]) / 2.0)
    prev = None
    for t in samples:
        pa, pb = a.state_at(t), b.state_at(t)
        if pa == pb:
            return Conflict(time=t, cell=pa, robots=(a.robot_index, b.robot_index))
        if prev is not None:
            qa, qb = prev[1], prev[2]
            # head-on exchange between consecutive samples: grid robots
            # cannot pass through each other even if sampling misses it
            if pa == qb and pb == qa and pa != qa:
                return Conflict(time=t, cell=pa, robots=(a.robot_index, b.robot_index))
        prev = (t, pa, pb)
    return None


@dataclass(frozen=True)
class CollisionReport:
    ok: bool
    conflict: Conflict | None

    def __bool__(self):
        return self.ok


def non_colliding(trajectories: list[Trajectory]) -> CollisionReport:
    """True iff no two trajectories share a cell at any time.

    Checks all segment boundaries plus segment midpoints, which is exhaustive
    for piecewise-constant position functions, and additionally flags swap
    conflicts.  A finished robot is treated as parked at its final cell.
    """
    earliest: Conflict | None = None
    for i in range(len(trajectories)):
        for j in range(i + 1, len(trajectories)):
            c = _pair_conflict(trajectories[i], trajectories[j])
            if c is not None and (earliest is None or c.time < earliest.time):
                earliest = c
    return CollisionReport(ok=earliest is None, conflict=earliest)


def load_gridworld(scenario, robots: int | None = None) -> TransitionSystem:
    """Instantiate the scenario's grid as a transition system.

    ``robots`` restricts the instance to the first k start cells (a single
    robot uses only the first entry).  Moves have the scenario's global move
    duration unless an explicit per-action duration overrides it.
    """
    starts = scenario.robots if robots is None else scenario.robots[:robots]
    if robots is not None and robots > len(scenario.robots):
        raise MalformedScenarioError(
            f"scenario lists {len(scenario.robots)} robot starts, {robots} requested"
        )
    durations = {a: scenario.options.move_duration for a in MOVES}
    durations[WAIT] = scenario.options.move_duration
    durations.update(scenario.options.action_durations)
    labels = {cell: name for name, cells in scenario.events.items() for cell in cells}
    return TransitionSystem(
        width=scenario.width,
        height=scenario.height,
        walls=frozenset(scenario.walls),
        initial_states=tuple(starts),
        labels=labels,
        move_durations=durations,
    )
