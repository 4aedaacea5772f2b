"""Timed partial orders and their difference-bound semantics.

A specification is a DAG of events plus clocks that are reset at events and
compared against constants in guards.  Every guard clause resolves to a
difference bound between two event timestamps (or an absolute bound against
the time origin), so the whole specification compiles into a set of interval
constraints that a simple-temporal-network check can tighten or refute.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousResetError,
    CyclicOrderError,
    EmptyIntervalError,
    MalformedInputError,
    MissingEventError,
)

INF = float("inf")

#: absolute tolerance for feasibility checks on real-valued timestamps
TIME_TOL = 1e-9

_COMPARATORS = ("<=", ">=")


@dataclass(frozen=True)
class TpoSpec:
    """A timed partial order: precedence DAG, clocks, guards, resets.

    ``events`` is an ordered collection of unique identifiers.  ``edges``
    are ordered pairs forming a DAG; the transitive closure of the edge
    relation is the strict partial order.  ``resets`` maps an event to the
    clocks it resets; ``guards`` maps an event to clauses
    ``(clock, comparator, constant)`` with comparator ``<=`` or ``>=`` and a
    non-negative constant.
    """

    events: tuple[str, ...]
    edges: tuple[tuple[str, str], ...] = ()
    clocks: tuple[str, ...] = ()
    resets: dict[str, frozenset[str]] = field(default_factory=dict)
    guards: dict[str, tuple[tuple[str, str, float], ...]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.events)) != len(self.events):
            raise MalformedInputError(f"duplicate event identifiers: {sorted(self.events)}")
        known = set(self.events)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise _malformed(f"edge ({a!r}, {b!r}) references unknown event")
            if a == b:
                raise CyclicOrderError([a, a])
        clockset = set(self.clocks)
        for ev, cs in self.resets.items():
            if ev not in known:
                raise _malformed(f"reset at unknown event {ev!r}")
            for c in cs:
                if c not in clockset:
                    raise _malformed(f"reset of unknown clock {c!r} at {ev!r}")
        for ev, clauses in self.guards.items():
            if ev not in known:
                raise _malformed(f"guard at unknown event {ev!r}")
            for clock, op, const in clauses:
                if clock not in clockset:
                    raise _malformed(f"guard on unknown clock {clock!r} at {ev!r}")
                if op not in _COMPARATORS:
                    raise _malformed(f"guard comparator {op!r} at {ev!r}; only <= and >=")
                if not (const >= 0):
                    raise _malformed(f"guard constant {const!r} at {ev!r} must be >= 0")
        self._check_acyclic()

    def _check_acyclic(self):
        succ = {e: [] for e in self.events}
        for a, b in self.edges:
            succ[a].append(b)
        state = {e: 0 for e in self.events}  # 0 unseen, 1 on stack, 2 done
        stack_trace: list[str] = []

        def visit(e):
            state[e] = 1
            stack_trace.append(e)
            for nxt in succ[e]:
                if state[nxt] == 1:
                    cycle = stack_trace[stack_trace.index(nxt):] + [nxt]
                    raise CyclicOrderError(cycle)
                if state[nxt] == 0:
                    visit(nxt)
            stack_trace.pop()
            state[e] = 2

        for e in self.events:
            if state[e] == 0:
                visit(e)

    def strict_ancestors(self) -> dict[str, set[str]]:
        """Map each event to the set of events strictly below it."""
        pred = {e: set() for e in self.events}
        for a, b in self.edges:
            pred[b].add(a)
        anc: dict[str, set[str]] = {}

        def collect(e):
            if e in anc:
                return anc[e]
            acc: set[str] = set()
            for p in pred[e]:
                acc.add(p)
                acc |= collect(p)
            anc[e] = acc
            return acc

        for e in self.events:
            collect(e)
        return anc


def _malformed(msg):
    return MalformedInputError(msg)


@dataclass(frozen=True)
class DiffConstraintSet:
    """Interval constraints over event timestamps.

    ``pair_bounds[(a, b)] = (lo, hi)`` constrains ``t_b - t_a`` for events
    with ``a`` strictly before ``b`` in the precedence closure.
    ``abs_bounds[e] = (lo, hi)`` constrains ``t_e`` against the time origin;
    every event has an absolute entry (default ``(0, inf)``).  Upper bounds
    use ``float('inf')`` as the explicit no-bound sentinel.
    """

    events: tuple[str, ...]
    pair_bounds: dict[tuple[str, str], tuple[float, float]]
    abs_bounds: dict[str, tuple[float, float]]

    def precedence_closure(self) -> set[tuple[str, str]]:
        """Transitive closure of the constrained-pair relation."""
        succ: dict[str, set[str]] = {e: set() for e in self.events}
        for a, b in self.pair_bounds:
            succ[a].add(b)
        closure: set[tuple[str, str]] = set()
        for root in self.events:
            seen: set[str] = set()
            stack = [root]
            while stack:
                cur = stack.pop()
                for nxt in succ[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            closure.update((root, b) for b in seen)
        return closure

    def empty_intervals(self) -> list[tuple]:
        """Pairs or events whose stored interval is already empty."""
        bad = [pair for pair, (lo, hi) in self.pair_bounds.items() if lo > hi + TIME_TOL]
        bad += [ev for ev, (lo, hi) in self.abs_bounds.items() if lo > hi + TIME_TOL]
        return bad


@dataclass(frozen=True)
class TimedTrace:
    """A map from events to non-negative timestamps."""

    entries: dict[str, float]

    def __post_init__(self):
        for ev, t in self.entries.items():
            if not (t >= 0):
                raise _malformed(f"timestamp for {ev!r} must be >= 0, got {t!r}")


@dataclass(frozen=True)
class Violation:
    kind: str  # "pair" or "absolute"
    events: tuple[str, ...]
    bound: tuple[float, float]
    value: float
    slack: float  # negative by exactly the violated amount


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    tightened: DiffConstraintSet | None
    negative_cycle: tuple[str, ...] | None


def _intersect(lo1, hi1, lo2, hi2):
    return max(lo1, lo2), min(hi1, hi2)


def compile_tpo(spec: TpoSpec) -> DiffConstraintSet:
    """Translate a timed partial order into difference-bound intervals.

    Each DAG edge contributes a pair bound ``[0, inf)``.  Each guard clause
    ``c <= a`` / ``c >= a`` at event ``e`` binds ``t_e - t_r`` where ``r`` is
    the unique maximal ancestor of ``e`` that resets ``c``; if no ancestor
    resets ``c`` the clock has run from the origin and the clause binds
    ``t_e`` absolutely.  Bounds accumulating on the same pair are
    intersected.

    Raises ``AmbiguousResetError`` when several incomparable ancestors reset
    the guard's clock, and ``EmptyIntervalError`` when an intersection comes
    out empty.
    """
    anc = spec.strict_ancestors()
    pair: dict[tuple[str, str], tuple[float, float]] = {}
    absb: dict[str, tuple[float, float]] = {e: (0.0, INF) for e in spec.events}

    for a, b in spec.edges:
        lo, hi = pair.get((a, b), (0.0, INF))
        pair[(a, b)] = _intersect(lo, hi, 0.0, INF)

    for ev in spec.events:
        for clock, op, const in spec.guards.get(ev, ()):
            resetters = [a for a in anc[ev] if clock in spec.resets.get(a, frozenset())]
            if resetters:
                maximal = [
                    r for r in resetters
                    if not any(r in anc[other] for other in resetters if other != r)
                ]
                if len(maximal) != 1:
                    raise AmbiguousResetError(ev, clock, sorted(maximal))
                anchor = maximal[0]
                lo, hi = pair.get((anchor, ev), (0.0, INF))
                if op == "<=":
                    lo, hi = _intersect(lo, hi, 0.0, const)
                else:
                    lo, hi = _intersect(lo, hi, const, INF)
                if lo > hi + TIME_TOL:
                    raise EmptyIntervalError(f"t[{ev}] - t[{anchor}]", lo, hi)
                pair[(anchor, ev)] = (lo, hi)
            else:
                lo, hi = absb[ev]
                if op == "<=":
                    lo, hi = _intersect(lo, hi, 0.0, const)
                else:
                    lo, hi = _intersect(lo, hi, const, INF)
                if lo > hi + TIME_TOL:
                    raise EmptyIntervalError(f"t[{ev}]", lo, hi)
                absb[ev] = (lo, hi)

    return DiffConstraintSet(events=tuple(spec.events), pair_bounds=pair, abs_bounds=absb)


def raw_constraints(
    events,
    pairs=(),
    absolute=(),
) -> DiffConstraintSet:
    """Build a constraint set directly from listed intervals.

    ``pairs``: iterables ``(a, b, lo, hi)`` with ``hi`` possibly ``None``
    (no upper bound); ``absolute``: ``(event, lo, hi)`` likewise.  This is
    the raw form that bypasses clock compilation; empty intervals are kept
    as stored and surface as inconsistency in ``check_consistency``.
    """
    events = tuple(events)
    known = set(events)
    pair: dict[tuple[str, str], tuple[float, float]] = {}
    absb: dict[str, tuple[float, float]] = {e: (0.0, INF) for e in events}
    for a, b, lo, hi in pairs:
        if a not in known or b not in known:
            raise _malformed(f"pair constraint ({a!r}, {b!r}) references unknown event")
        hi = INF if hi is None else float(hi)
        plo, phi = pair.get((a, b), (0.0, INF))
        pair[(a, b)] = _intersect(plo, phi, float(lo), hi)
    for ev, lo, hi in absolute:
        if ev not in known:
            raise _malformed(f"absolute constraint references unknown event {ev!r}")
        hi = INF if hi is None else float(hi)
        alo, ahi = absb[ev]
        absb[ev] = _intersect(alo, ahi, float(lo), hi)
    dcs = DiffConstraintSet(events=events, pair_bounds=pair, abs_bounds=absb)
    # the raw form may describe cyclic precedence implicitly; reject it here
    _toposort_or_raise(dcs)
    return dcs


def _toposort_or_raise(dcs: DiffConstraintSet):
    spec_edges = tuple(dcs.pair_bounds.keys())
    TpoSpec(events=dcs.events, edges=spec_edges)  # reuses DAG validation


def merge_constraints(a: DiffConstraintSet, b: DiffConstraintSet) -> DiffConstraintSet:
    """Intersect two constraint sets over the union of their events."""
    events = tuple(dict.fromkeys(a.events + b.events))
    pair = dict(a.pair_bounds)
    for key, (lo, hi) in b.pair_bounds.items():
        plo, phi = pair.get(key, (0.0, INF))
        pair[key] = _intersect(plo, phi, lo, hi)
    absb = {e: (0.0, INF) for e in events}
    for src in (a.abs_bounds, b.abs_bounds):
        for ev, (lo, hi) in src.items():
            alo, ahi = absb[ev]
            absb[ev] = _intersect(alo, ahi, lo, hi)
    return DiffConstraintSet(events=events, pair_bounds=pair, abs_bounds=absb)


# --- simple-temporal-network consistency -----------------------------------

_ORIGIN = "<t0>"


def _distance_matrix(dcs: DiffConstraintSet):
    """STN distance graph: entry (i, j) bounds t_j - t_i from above."""
    names = [_ORIGIN] + list(dcs.events)
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    dist = np.full((n, n), INF)
    np.fill_diagonal(dist, 0.0)

    def add(i, j, w):
        if w < dist[i, j]:
            dist[i, j] = w

    for (a, b), (lo, hi) in dcs.pair_bounds.items():
        ia, ib = index[a], index[b]
        if hi < INF:
            add(ia, ib, hi)
        add(ib, ia, -lo)
    for ev, (lo, hi) in dcs.abs_bounds.items():
        ie = index[ev]
        if hi < INF:
            add(0, ie, hi)
        add(ie, 0, -lo)
    return names, dist


def _negative_cycle_witness(names, dist0) -> tuple[str, ...]:
    """Bellman-Ford with predecessors to name one negative cycle."""
    n = len(names)
    edges = [
        (i, j, dist0[i, j])
        for i in range(n)
        for j in range(n)
        if i != j and dist0[i, j] < INF
    ]
    d = np.zeros(n)  # distances from a virtual source connected to all
    pred = [-1] * n
    marked = -1
    for _ in range(n):
        marked = -1
        for i, j, w in edges:
            if d[i] + w < d[j] - 1e-12:
                d[j] = d[i] + w
                pred[j] = i
                marked = j
        if marked < 0:
            break
    if marked < 0:
        return ()
    # walk back n steps to land inside the cycle, then collect it
    cur = marked
    for _ in range(n):
        cur = pred[cur]
    cycle = [cur]
    node = pred[cur]
    while node != cur:
        cycle.append(node)
        node = pred[node]
    cycle.reverse()
    return tuple(names[i] if names[i] != _ORIGIN else "t=0" for i in cycle)


def check_consistency(dcs: DiffConstraintSet) -> ConsistencyReport:
    """Decide satisfiability of the constraint set via all-pairs shortest paths.

    Returns a report: consistent with tightened (shortest-path) bounds, or
    inconsistent with a witness negative cycle.  Inconsistency is a report,
    not an error.
    """
    names, dist = _distance_matrix(dcs)
    d = dist.copy()
    n = len(names)
    for k in range(n):
        # vectorized Floyd-Warshall relaxation through k
        via = d[:, k, None] + d[None, k, :]
        np.minimum(d, via, out=d)
    if np.any(np.diag(d) < -TIME_TOL):
        cycle = _negative_cycle_witness(names, dist)
        return ConsistencyReport(consistent=False, tightened=None, negative_cycle=cycle)

    index = {name: i for i, name in enumerate(names)}
    tight_pairs = {}
    for (a, b), _ in dcs.pair_bounds.items():
        ia, ib = index[a], index[b]
        tight_pairs[(a, b)] = (-d[ib, ia], d[ia, ib])
    tight_abs = {}
    for ev in dcs.events:
        ie = index[ev]
        tight_abs[ev] = (-d[ie, 0], d[0, ie])
    tightened = DiffConstraintSet(
        events=dcs.events, pair_bounds=tight_pairs, abs_bounds=tight_abs
    )
    return ConsistencyReport(consistent=True, tightened=tightened, negative_cycle=None)


@dataclass(frozen=True)
class SatisfactionResult:
    ok: bool
    violations: tuple[Violation, ...]

    def __bool__(self):
        return self.ok


def satisfies(trace: TimedTrace, dcs: DiffConstraintSet) -> SatisfactionResult:
    """Check a timed trace against every pair and absolute bound.

    Bounds are inclusive with a 1e-9 absolute tolerance.  Raises
    ``MissingEventError`` when the trace lacks a constrained event.
    """
    for ev in dcs.events:
        if ev not in trace.entries:
            raise MissingEventError(ev)
    violations: list[Violation] = []
    for (a, b), (lo, hi) in dcs.pair_bounds.items():
        value = trace.entries[b] - trace.entries[a]
        if value < lo - TIME_TOL:
            violations.append(Violation("pair", (a, b), (lo, hi), value, value - lo))
        elif value > hi + TIME_TOL:
            violations.append(Violation("pair", (a, b), (lo, hi), value, hi - value))
    for ev, (lo, hi) in dcs.abs_bounds.items():
        value = trace.entries[ev]
        if value < lo - TIME_TOL:
            violations.append(Violation("absolute", (ev,), (lo, hi), value, value - lo))
        elif value > hi + TIME_TOL:
            violations.append(Violation("absolute", (ev,), (lo, hi), value, hi - value))
    return SatisfactionResult(ok=not violations, violations=tuple(violations))
