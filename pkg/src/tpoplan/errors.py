"""Exception hierarchy shared across the planning pipeline.

The CLI maps these onto process exit codes: malformed input -> 1,
infeasible / inconsistent -> 2, resource limits -> 3.
"""


class PlanningError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInputError(PlanningError):
    """Input that fails structural validation (exit code 1)."""


class InfeasibilityError(PlanningError):
    """A well-formed problem with no solution (exit code 2)."""


class LimitError(PlanningError):
    """A resource guard or limit was hit (exit code 3)."""


# --- timed partial orders ------------------------------------------------

class CyclicOrderError(MalformedInputError):
    """The precedence edge set contains a cycle."""

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__(f"precedence edges contain a cycle: {' -> '.join(self.cycle)}")


class AmbiguousResetError(MalformedInputError):
    """A guard's clock is reset on several incomparable ancestors."""

    def __init__(self, event, clock, ancestors):
        self.event = event
        self.clock = clock
        self.ancestors = tuple(ancestors)
        super().__init__(
            f"guard on clock {clock!r} at event {event!r} has multiple maximal "
            f"resetting ancestors: {', '.join(self.ancestors)}"
        )


class EmptyIntervalError(InfeasibilityError):
    """Intersecting guard-derived bounds produced an empty interval."""

    def __init__(self, what, lo, hi):
        self.what = what
        self.lo = lo
        self.hi = hi
        super().__init__(f"empty interval for {what}: [{lo}, {hi}]")


class MissingEventError(MalformedInputError):
    """A timed trace lacks an event that the constraints mention."""

    def __init__(self, event):
        self.event = event
        super().__init__(f"trace assigns no timestamp to event {event!r}")


class InconsistentSpecError(InfeasibilityError):
    """The compiled constraint set admits no timed trace."""

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__(f"timing constraints are inconsistent (cycle: {', '.join(self.cycle)})")


# --- transition systems ---------------------------------------------------

class MalformedScenarioError(MalformedInputError):
    """Scenario file fails schema or geometry validation."""


class InvalidPlanError(MalformedInputError):
    """A plan step uses an undefined transition."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"plan step {step} has no defined transition")


# --- tour graph construction ---------------------------------------------

class UnrealizableEventError(MalformedInputError):
    """An event in the constraints has no labeled state."""

    def __init__(self, event):
        self.event = event
        super().__init__(f"event {event!r} is not realizable: no labeled state")


class UnreachableEventError(InfeasibilityError):
    """No robot can reach any state carrying this event's label."""

    def __init__(self, event):
        self.event = event
        super().__init__(f"event {event!r} is unreachable from every initial state")


# --- MILP solver ----------------------------------------------------------

class NoFiniteEdgesError(InfeasibilityError):
    """Some subset has no admissible incoming or outgoing edge."""

    def __init__(self, event, direction):
        self.event = event
        self.direction = direction
        super().__init__(f"subset for event {event!r} has no admissible {direction} edge")


class MilpInfeasibleError(InfeasibilityError):
    """The MILP was proven infeasible."""


class NumericalFailureError(PlanningError):
    """The LP kernel could not reach its tolerance; never silent."""


class DisconnectedSelectionError(PlanningError):
    """Enabled edges do not decompose into depot-anchored walks."""


class SolveLimitError(LimitError):
    """Wall-clock or node limit hit; carries the incumbent if any."""

    def __init__(self, solution):
        self.solution = solution
        super().__init__("solve limit exceeded")


# --- planner / oracle ------------------------------------------------------

class RepairFailedError(InfeasibilityError):
    """No delay assignment within the margin resolves the collisions."""


class InstanceTooLargeError(LimitError):
    """Brute-force guard: instance beyond the enumeration budget."""

    def __init__(self, nodes, robots):
        self.nodes = nodes
        self.robots = robots
        super().__init__(
            f"instance too large for brute force ({nodes} non-depot nodes, {robots} robots)"
        )
