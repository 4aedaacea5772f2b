"""Delay-tolerance analysis of a fixed set of tours.

Given the realized tours, every leg contributes an edge-delay term and a
node-delay term on top of its realized duration, and each visit time is its
robot's prefix sum of legs plus delays.  The reported margin is the largest
uniform per-term delay under which every timing constraint still holds.
Two diagnostics accompany it: the compensating optimum of the LP where
delays are only bounded below by the margin (terms may then differ), and a
symmetric worst-case margin tolerating per-term perturbations of either
sign.

Realized leg durations fold scheduled waiting into the nominal, so the zero
delay is always feasible and the analysis can never be infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import OPTIMAL, UNBOUNDED, solve_lp
from .tpo import INF, DiffConstraintSet, TimedTrace, satisfies

#: sentinel for "no constraint can ever bind"
UNBOUNDED_MARGIN = INF


@dataclass(frozen=True)
class TourTiming:
    """One robot's realized tour: node ids, their events, completion times."""

    nodes: tuple[int, ...]          # tour-graph node ids, depot first
    events: tuple[str | None, ...]  # event per node (None for depots)
    times: tuple[float, ...]        # realized completion times, depot at 0


@dataclass(frozen=True)
class MarginReport:
    epsilon: float              # max uniform extra delay per term
    epsilon_lp: float           # compensating optimum (delays >= eps only)
    epsilon_sym: float          # worst-case symmetric margin
    binding: tuple[str, ...]    # constraints tight at the uniform optimum


def _delay_structure(timings: list[TourTiming]):
    """Assign global delay-term ids and event prefix-term lists.

    Each tour position past the depot contributes two terms (edge then
    node), so an event at position ``pos`` depends on its robot's first
    ``2 * pos`` terms.
    """
    event_terms: dict[str, list[int]] = {}
    event_time: dict[str, float] = {}
    next_term = 0
    for timing in timings:
        robot_terms: list[int] = []
        for pos, (event, t) in enumerate(zip(timing.events, timing.times)):
            if pos > 0:
                robot_terms.extend((next_term, next_term + 1))
                next_term += 2
            if event is not None:
                event_terms[event] = list(robot_terms)
                event_time[event] = t
    return event_terms, event_time, next_term


def _constraint_rows(timings: list[TourTiming], dcs: DiffConstraintSet):
    """(name, coefficient dict over delay terms, lo, hi, nominal) per row.

    Shared same-robot prefixes cancel, so a constraint between consecutive
    stops touches exactly the terms of the legs between them.
    """
    event_terms, event_time, _ = _delay_structure(timings)
    rows = []
    for (a, b), (lo, hi) in sorted(dcs.pair_bounds.items()):
        if a not in event_terms or b not in event_terms:
            continue
        coef: dict[int, float] = {}
        for k in event_terms[b]:
            coef[k] = coef.get(k, 0.0) + 1.0
        for k in event_terms[a]:
            coef[k] = coef.get(k, 0.0) - 1.0
        coef = {k: v for k, v in coef.items() if v != 0.0}
        nominal = event_time[b] - event_time[a]
        rows.append((f"pair {a}->{b}", coef, lo, hi, nominal))
    for ev in sorted(dcs.abs_bounds):
        if ev not in event_terms:
            continue
        lo, hi = dcs.abs_bounds[ev]
        coef = {k: 1.0 for k in event_terms[ev]}
        rows.append((f"abs {ev}", coef, lo, hi, event_time[ev]))
    return rows


def robustness(timings: list[TourTiming], dcs: DiffConstraintSet) -> MarginReport:
    """Margin of a fixed set of tours against the difference bounds.

    Degenerate tours (no delayable term) and constraint sets that no delay
    can ever violate yield the infinite sentinel.
    """
    _, _, nterms = _delay_structure(timings)
    rows = _constraint_rows(timings, dcs)
    if nterms == 0 or not rows:
        return MarginReport(UNBOUNDED_MARGIN, UNBOUNDED_MARGIN, UNBOUNDED_MARGIN, ())

    # uniform margin: with every term at eps a row moves by its net
    # coefficient, so only rows whose net works against a finite bound cap it
    caps: list[tuple[str, float]] = []
    for name, coef, lo, hi, nominal in rows:
        net = sum(coef.values())
        if net > 0 and hi < INF:
            caps.append((name, (hi - nominal) / net))
        elif net < 0:
            caps.append((name, (nominal - lo) / (-net)))
    if not caps:
        eps_uniform = UNBOUNDED_MARGIN
        binding: tuple[str, ...] = ()
    else:
        eps_uniform = min(cap for _, cap in caps)
        binding = tuple(name for name, cap in caps if cap <= eps_uniform + 1e-9)

    # compensating variant as an LP: maximize eps with per-term delays only
    # bounded below by eps
    c = np.zeros(1 + nterms)
    c[0] = -1.0
    lp_rows, senses, rhs = [], [], []
    for k in range(nterms):
        lp_rows.append({0: 1.0, 1 + k: -1.0})
        senses.append("<=")
        rhs.append(0.0)
    for _, coef, lo, hi, nominal in rows:
        if not coef:
            continue
        shifted = {1 + k: v for k, v in coef.items()}
        if hi < INF:
            lp_rows.append(shifted)
            senses.append("<=")
            rhs.append(hi - nominal)
        lp_rows.append(dict(shifted))
        senses.append(">=")
        rhs.append(lo - nominal)
    res = solve_lp(
        c, lp_rows, senses, rhs, np.full(1 + nterms, -np.inf), np.full(1 + nterms, np.inf)
    )
    if res.status == UNBOUNDED:
        eps_lp = UNBOUNDED_MARGIN
    elif res.status == OPTIMAL:
        eps_lp = float(-res.objective)
    else:  # pragma: no cover - the zero-delay point is always feasible
        eps_lp = UNBOUNDED_MARGIN

    # symmetric worst case: each term may move either way, so a row drifts
    # by at most the sum of absolute coefficients times eps
    sym_caps = []
    for _, coef, lo, hi, nominal in rows:
        weight = sum(abs(v) for v in coef.values())
        if weight == 0:
            continue
        if hi < INF:
            sym_caps.append((hi - nominal) / weight)
        sym_caps.append((nominal - lo) / weight)
    eps_sym = min(sym_caps) if sym_caps else UNBOUNDED_MARGIN

    return MarginReport(
        epsilon=float(eps_uniform),
        epsilon_lp=float(eps_lp),
        epsilon_sym=float(eps_sym),
        binding=binding,
    )


def shifted_trace(timings: list[TourTiming], eps: float) -> TimedTrace:
    """Event times when every delay term equals ``eps`` exactly."""
    event_terms, event_time, _ = _delay_structure(timings)
    entries = {ev: event_time[ev] + len(event_terms[ev]) * eps for ev in event_time}
    return TimedTrace(entries=entries)


def validate_margin(timings: list[TourTiming], dcs: DiffConstraintSet, eps: float) -> bool:
    """Empirical check: uniform delays of exactly ``eps`` still satisfy.

    Only meaningful for finite eps."""
    if eps == INF:
        raise ValueError("validate_margin requires a finite margin")
    trace = shifted_trace(timings, eps)
    return bool(satisfies(trace, dcs))
