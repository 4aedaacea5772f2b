"""Timed-partial-order compilation, consistency, and trace checking."""

import itertools
import random

import pytest

from tpoplan.errors import (
    AmbiguousResetError,
    CyclicOrderError,
    EmptyIntervalError,
    MissingEventError,
)
from tpoplan.tpo import (
    INF,
    TimedTrace,
    TpoSpec,
    check_consistency,
    compile_tpo,
    merge_constraints,
    raw_constraints,
    satisfies,
)


def turnaround_spec():
    # stairs/deboard/catering/unload chain with two clocks: one bounding the
    # whole turnaround, one forcing a 30-unit gap before catering
    return TpoSpec(
        events=("e1", "e2", "e3", "e4", "e5", "e6"),
        edges=(("e1", "e2"), ("e2", "e3"), ("e3", "e4"), ("e4", "e6"),
               ("e1", "e5"), ("e5", "e6")),
        clocks=("c1", "c2"),
        resets={"e1": frozenset({"c1"}), "e2": frozenset({"c2"})},
        guards={"e4": (("c2", ">=", 30.0),), "e6": (("c1", "<=", 60.0),)},
    )


class TestCompile:
    def test_guard_with_reset_binds_pair(self):
        dcs = compile_tpo(turnaround_spec())
        assert dcs.pair_bounds[("e1", "e6")] == (0.0, 60.0)
        assert dcs.pair_bounds[("e2", "e4")] == (30.0, INF)

    def test_plain_edges_become_nonnegative_pairs(self):
        dcs = compile_tpo(TpoSpec(events=("e1", "e2"), edges=(("e1", "e2"),)))
        assert dcs.pair_bounds == {("e1", "e2"): (0.0, INF)}
        assert dcs.abs_bounds["e1"] == (0.0, INF)

    def test_unreset_clock_gives_absolute_window(self):
        spec = TpoSpec(
            events=("grey", "purple"),
            edges=(("grey", "purple"),),
            clocks=("c1",),
            guards={"grey": (("c1", ">=", 20.0), ("c1", "<=", 30.0))},
        )
        dcs = compile_tpo(spec)
        assert dcs.abs_bounds["grey"] == (20.0, 30.0)

    def test_deterministic(self):
        a = compile_tpo(turnaround_spec())
        b = compile_tpo(turnaround_spec())
        assert a == b

    def test_ambiguous_reset_rejected(self):
        spec = TpoSpec(
            events=("a", "b", "c"),
            edges=(("a", "c"), ("b", "c")),
            clocks=("c1",),
            resets={"a": frozenset({"c1"}), "b": frozenset({"c1"})},
            guards={"c": (("c1", "<=", 5.0),)},
        )
        with pytest.raises(AmbiguousResetError):
            compile_tpo(spec)

    def test_comparable_resetters_pick_the_maximal(self):
        spec = TpoSpec(
            events=("a", "b", "c"),
            edges=(("a", "b"), ("b", "c")),
            clocks=("c1",),
            resets={"a": frozenset({"c1"}), "b": frozenset({"c1"})},
            guards={"c": (("c1", "<=", 5.0),)},
        )
        dcs = compile_tpo(spec)
        assert dcs.pair_bounds[("b", "c")] == (0.0, 5.0)
        assert ("a", "c") not in dcs.pair_bounds

    def test_cycle_rejected(self):
        with pytest.raises(CyclicOrderError):
            TpoSpec(events=("a", "b"), edges=(("a", "b"), ("b", "a")))

    def test_empty_interval_rejected(self):
        spec = TpoSpec(
            events=("a", "b"),
            edges=(("a", "b"),),
            clocks=("c1",),
            resets={"a": frozenset({"c1"})},
            guards={"b": (("c1", "<=", 5.0), ("c1", ">=", 10.0))},
        )
        with pytest.raises(EmptyIntervalError):
            compile_tpo(spec)


def brute_force_feasible(dcs, horizon, step=1):
    """Independent oracle: search an integer grid for a satisfying trace."""
    grid = range(0, horizon + 1, step)
    for combo in itertools.product(grid, repeat=len(dcs.events)):
        trace = dict(zip(dcs.events, (float(v) for v in combo)))
        ok = True
        for (a, b), (lo, hi) in dcs.pair_bounds.items():
            if not (lo <= trace[b] - trace[a] <= hi):
                ok = False
                break
        if ok:
            for ev, (lo, hi) in dcs.abs_bounds.items():
                if not (lo <= trace[ev] <= hi):
                    ok = False
                    break
        if ok:
            return True
    return False


class TestConsistency:
    def test_empty_interval_is_inconsistent_with_pair_cycle(self):
        dcs = raw_constraints(("e1", "e2"), [("e1", "e2", 10.0, 5.0)])
        report = check_consistency(dcs)
        assert not report.consistent
        assert set(report.negative_cycle) == {"e1", "e2"}

    def test_chain_upper_vs_direct_lower(self):
        dcs = raw_constraints(
            ("e1", "e2", "e3"),
            [("e1", "e2", 0.0, 10.0), ("e2", "e3", 0.0, 10.0), ("e1", "e3", 25.0, None)],
        )
        # the oracle agrees there is no integer trace on a generous horizon
        assert not brute_force_feasible(dcs, horizon=30)
        assert not check_consistency(dcs).consistent

    def test_turnaround_set_is_consistent(self):
        dcs = compile_tpo(turnaround_spec())
        assert check_consistency(dcs).consistent
        assert brute_force_feasible(dcs, horizon=60, step=10)

    def test_tightening_is_sound_and_complete(self):
        rng = random.Random(7)
        for _ in range(30):
            events = tuple(f"e{k}" for k in range(rng.randint(2, 4)))
            pairs = []
            for i in range(len(events)):
                for j in range(i + 1, len(events)):
                    if rng.random() < 0.6:
                        lo = rng.randint(0, 6)
                        hi = rng.choice([None, lo + rng.randint(0, 6)])
                        pairs.append((events[i], events[j], float(lo), hi))
            absolute = [(events[-1], 0.0, float(rng.randint(4, 12)))]
            dcs = raw_constraints(events, pairs, absolute)
            report = check_consistency(dcs)
            if not report.consistent:
                assert not brute_force_feasible(dcs, horizon=14)
                continue
            tight = report.tightened
            for combo in itertools.product(range(0, 13, 2), repeat=len(events)):
                trace = TimedTrace(dict(zip(events, (float(v) for v in combo))))
                assert satisfies(trace, dcs).ok == satisfies(trace, tight).ok

    def test_tightened_bounds_shrink(self):
        dcs = raw_constraints(
            ("a", "b", "c"),
            [("a", "b", 2.0, None), ("b", "c", 3.0, None), ("a", "c", 0.0, 20.0)],
        )
        tight = check_consistency(dcs).tightened
        lo, hi = tight.pair_bounds[("a", "c")]
        assert lo == pytest.approx(5.0)
        assert hi == pytest.approx(20.0)


class TestSatisfies:
    def test_boundary_inclusive(self):
        dcs = raw_constraints(("e1", "e6"), [("e1", "e6", 0.0, 60.0)])
        trace = TimedTrace({"e1": 0.0, "e6": 60.0})
        assert satisfies(trace, dcs).ok

    def test_violation_carries_slack(self):
        dcs = raw_constraints(("e1", "e6"), [("e1", "e6", 0.0, 60.0)])
        res = satisfies(TimedTrace({"e1": 0.0, "e6": 61.0}), dcs)
        assert not res.ok
        assert res.violations[0].slack == pytest.approx(-1.0)

    def test_missing_event(self):
        dcs = raw_constraints(("e1", "e6"), [("e1", "e6", 0.0, 60.0)])
        with pytest.raises(MissingEventError):
            satisfies(TimedTrace({"e1": 0.0}), dcs)

    def test_precedence_edges_hold_for_accepted_traces(self):
        dcs = compile_tpo(turnaround_spec())
        trace = TimedTrace({"e1": 0.0, "e2": 5.0, "e3": 10.0, "e4": 35.0,
                            "e5": 7.0, "e6": 50.0})
        assert satisfies(trace, dcs).ok
        for a, b in turnaround_spec().edges:
            assert trace.entries[a] <= trace.entries[b]


def test_merge_intersects():
    a = raw_constraints(("x", "y"), [("x", "y", 1.0, 10.0)])
    b = raw_constraints(("x", "y"), [("x", "y", 3.0, 20.0)], [("x", 0.0, 4.0)])
    merged = merge_constraints(a, b)
    assert merged.pair_bounds[("x", "y")] == (3.0, 10.0)
    assert merged.abs_bounds["x"] == (0.0, 4.0)


def test_raw_constraints_reject_cycles():
    with pytest.raises(CyclicOrderError):
        raw_constraints(("a", "b"), [("a", "b", 0.0, None), ("b", "a", 0.0, None)])
