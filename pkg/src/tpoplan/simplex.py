"""Bounded-variable primal simplex with a slack crash basis.

The solver works on ``min c.x  s.t.  A x (<=, =, >=) b,  lo <= x <= hi`` with
infinite bounds allowed on either side.  Columns split into the structural
matrix (kept dense, column-major) and implicit identity columns: one slack
per row (bounded to encode the row sense) and one sign-matched artificial
per row.  The initial basis takes each row's slack where the starting
residual already fits the slack bounds and an artificial otherwise, so
phase 1 only has to repair genuinely violated rows.

Entering variables follow Dantzig pricing with a permanent switch to
Bland's rule after a run of degenerate pivots, which guarantees
termination.  All tie-breaking is by lowest column index, so runs are
deterministic.  ``LpWorkspace`` lets callers assemble the matrix once and
re-solve under changing bounds, which is what branch and bound needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_FEAS_TOL = 1e-7
_COST_TOL = 1e-7
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 128
_BLAND_AFTER = 600  # consecutive degenerate pivots before the fallback


@dataclass
class LpResult:
    status: str
    x: np.ndarray          # structural variables only
    objective: float
    iterations: int
    dj: np.ndarray | None = None  # structural reduced costs at the optimum


class LpWorkspace:
    """Assembled rows reusable across solves that only change bounds."""

    def __init__(self, c, rows, senses, rhs):
        self.nstruct = len(c)
        self.m = len(rows)
        self.c = np.asarray(c, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        A = np.zeros((self.m, self.nstruct), order="F")
        for r, row in enumerate(rows):
            for col, coef in row.items():
                A[r, col] = coef
        self.A = A
        self.slack_lo = np.zeros(self.m)
        self.slack_hi = np.zeros(self.m)
        for r, sense in enumerate(senses):
            if sense == "<=":
                self.slack_lo[r], self.slack_hi[r] = 0.0, np.inf
            elif sense == ">=":
                self.slack_lo[r], self.slack_hi[r] = -np.inf, 0.0
            elif sense == "=":
                self.slack_lo[r], self.slack_hi[r] = 0.0, 0.0
            else:
                raise ValueError(f"unknown row sense {sense!r}")

    def solve(self, lo, hi, maxiter: int | None = None, start_high=None) -> LpResult:
        """``start_high`` optionally marks structural columns whose crash
        value should sit at the upper bound (when finite) instead of the
        lower; a good hint cuts phase-1 work substantially."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            return LpResult(INFEASIBLE, np.zeros(self.nstruct), np.inf, 0)
        kern = _Kernel(self, lo, hi, start_high=start_high)
        if maxiter is None:
            maxiter = 2000 + 50 * (self.m + self.nstruct)
        return kern.optimize(maxiter)


def solve_lp(c, rows, senses, rhs, lo, hi, maxiter: int | None = None) -> LpResult:
    """One-shot convenience wrapper around ``LpWorkspace``.

    ``rows`` is a list of ``{col: coef}`` dicts over structural columns,
    ``senses`` one of ``<=``, ``=``, ``>=`` per row.
    """
    return LpWorkspace(c, rows, senses, rhs).solve(lo, hi, maxiter=maxiter)


class _Kernel:
    """Column layout: [0, nstruct) structural, then m slacks, then m
    artificials; slack and artificial columns are identity-shaped and never
    materialized."""

    def __init__(self, ws: LpWorkspace, lo, hi, start_high=None):
        self.ws = ws
        m, nstruct = ws.m, ws.nstruct
        self.m = m
        self.nstruct = nstruct
        self.ncols = nstruct + 2 * m

        self.lo = np.concatenate([lo, ws.slack_lo, np.zeros(m)])
        self.hi = np.concatenate([hi, ws.slack_hi, np.full(m, np.inf)])
        self.x = np.zeros(self.ncols)

        # structurals start at a finite bound (0 when free)
        start = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        if start_high is not None:
            high = start_high & np.isfinite(hi)
            start = np.where(high, hi, start)
        self.x[:nstruct] = start
        resid = ws.rhs - ws.A @ start

        # crash: slack where the residual fits, artificial otherwise
        slack_val = np.clip(resid, ws.slack_lo, ws.slack_hi)
        art_val = resid - slack_val
        self.signs = np.where(art_val >= 0, 1.0, -1.0)
        self.basis = np.where(
            np.abs(art_val) > 0.0,
            nstruct + m + np.arange(m),
            nstruct + np.arange(m),
        ).astype(np.int64)
        self.x[nstruct: nstruct + m] = np.where(np.abs(art_val) > 0.0, slack_val, resid)
        self.x[nstruct + m:] = np.abs(art_val)
        self.in_basis = np.zeros(self.ncols, dtype=bool)
        self.in_basis[self.basis] = True
        binv_diag = np.ones(m)
        art_rows = self.basis >= nstruct + m
        binv_diag[art_rows] = self.signs[art_rows]
        self.binv = np.diag(binv_diag)

        self.iterations = 0
        self.bland = False
        self._degenerate_run = 0
        self._since_refactor = 0
        self._final_d = None
        self.needs_phase1 = bool(np.any(np.abs(art_val) > 0.0))

    # -- implicit column handling -------------------------------------------

    def _column_w(self, j: int) -> np.ndarray:
        nstruct, m = self.nstruct, self.m
        if j < nstruct:
            return self.binv @ self.ws.A[:, j]
        r = j - nstruct
        if r < m:
            return self.binv[:, r].copy()
        r -= m
        return self.signs[r] * self.binv[:, r]

    def _reduced_costs(self, cost_struct, cost_art) -> np.ndarray:
        cb = np.zeros(self.m)
        js = self.basis
        struct_mask = js < self.nstruct
        cb[struct_mask] = cost_struct[js[struct_mask]]
        art_mask = js >= self.nstruct + self.m
        cb[art_mask] = cost_art[js[art_mask] - self.nstruct - self.m]
        y = cb @ self.binv
        d = np.empty(self.ncols)
        d[: self.nstruct] = cost_struct - y @ self.ws.A
        d[self.nstruct: self.nstruct + self.m] = -y
        d[self.nstruct + self.m:] = cost_art - self.signs * y
        d[self.basis] = 0.0
        return d

    # -- basis maintenance ----------------------------------------------------

    def refactor(self):
        m, nstruct = self.m, self.nstruct
        B = np.zeros((m, m))
        for pos, j in enumerate(self.basis):
            if j < nstruct:
                B[:, pos] = self.ws.A[:, j]
            elif j < nstruct + m:
                B[j - nstruct, pos] = 1.0
            else:
                r = j - nstruct - m
                B[r, pos] = self.signs[r]
        try:
            self.binv = np.linalg.solve(B, np.eye(m))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"singular basis during refactorization: {exc}")
        self._recompute_basics()
        self._since_refactor = 0

    def _recompute_basics(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        resid = self.ws.rhs - self.ws.A @ xn[: self.nstruct]
        resid -= xn[self.nstruct: self.nstruct + self.m]
        resid -= self.signs * xn[self.nstruct + self.m:]
        self.x[self.basis] = self.binv @ resid

    # -- simplex --------------------------------------------------------------

    def optimize(self, maxiter: int) -> LpResult:
        nstruct, m = self.nstruct, self.m
        if self.needs_phase1:
            cost_struct = np.zeros(nstruct)
            cost_art = np.ones(m)
            status = self._run(cost_struct, cost_art, maxiter)
            if status == UNBOUNDED:
                raise NumericalFailureError("phase-1 objective unbounded")
            infeas = float(self.x[nstruct + m:].sum())
            if infeas > 1e-6:
                return LpResult(INFEASIBLE, self.x[:nstruct].copy(), np.inf, self.iterations)
            self.hi[nstruct + m:] = 0.0  # artificials may never return
            self.x[nstruct + m:][~self.in_basis[nstruct + m:]] = 0.0
            self.bland = False
            self._degenerate_run = 0
        else:
            self.hi[nstruct + m:] = 0.0

        status = self._run(self.ws.c, np.zeros(m), maxiter)
        x = self.x[:nstruct].copy()
        if status == UNBOUNDED:
            return LpResult(UNBOUNDED, x, -np.inf, self.iterations)
        dj = self._final_d[: nstruct].copy() if self._final_d is not None else None
        return LpResult(OPTIMAL, x, float(self.ws.c @ x), self.iterations, dj=dj)

    def _run(self, cost_struct, cost_art, maxiter) -> str:
        self._final_d = None
        while True:
            if self.iterations >= maxiter:
                raise NumericalFailureError(
                    f"simplex iteration limit ({maxiter}) hit; basis may be cycling"
                )
            d = self._reduced_costs(cost_struct, cost_art)
            enter, sigma = self._choose_entering(d)
            if enter < 0:
                self._final_d = d
                return OPTIMAL

            w = self._column_w(enter)
            step, leave_pos, flip = self._ratio_test(enter, sigma, w)
            if step == np.inf:
                return UNBOUNDED

            self.iterations += 1
            self._since_refactor += 1
            self._degenerate_run = self._degenerate_run + 1 if step <= _PIVOT_TOL else 0
            if self._degenerate_run > _BLAND_AFTER:
                self.bland = True

            self.x[self.basis] -= sigma * step * w
            self.x[enter] += sigma * step
            if flip:
                # entering variable reaches its opposite bound; basis unchanged
                target = self.hi[enter] if sigma > 0 else self.lo[enter]
                self.x[enter] = target
                continue

            leaving = self.basis[leave_pos]
            # snap the leaving variable exactly onto the bound it hit
            coef = sigma * w[leave_pos]
            self.x[leaving] = self.lo[leaving] if coef > 0 else self.hi[leaving]
            self.basis[leave_pos] = enter
            self.in_basis[leaving] = False
            self.in_basis[enter] = True
            self._update_binv(w, leave_pos)
            if self._since_refactor >= _REFACTOR_EVERY:
                self.refactor()

    def _choose_entering(self, d: np.ndarray) -> tuple[int, float]:
        lo, hi, x = self.lo, self.hi, self.x
        nb = ~self.in_basis
        fixed = lo == hi
        at_lo = nb & ~fixed & (x <= lo + _FEAS_TOL)
        free = nb & ~fixed & np.isneginf(lo) & np.isposinf(hi)
        at_hi = nb & ~fixed & ~at_lo & ~free
        up = (at_lo | free) & (d < -_COST_TOL)
        down = (at_hi | free) & (d > _COST_TOL)
        candidates = up | down
        if not candidates.any():
            return -1, 0.0
        idx = np.flatnonzero(candidates)
        if self.bland:
            j = int(idx[0])
        else:
            j = int(idx[np.argmax(np.abs(d[idx]))])
        return j, (1.0 if d[j] < 0 else -1.0)

    def _ratio_test(self, enter: int, sigma: float, w: np.ndarray):
        """Largest step keeping all basics inside their bounds.

        Returns ``(step, leaving_position, bound_flip)``; a bound flip means
        the entering variable reaches its own opposite bound first.
        """
        xb = self.x[self.basis]
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        coef = sigma * w
        steps = np.full(self.m, np.inf)
        pos = coef > _PIVOT_TOL
        neg = coef < -_PIVOT_TOL
        with np.errstate(invalid="ignore"):
            steps[pos] = (xb[pos] - lob[pos]) / coef[pos]
            steps[neg] = (xb[neg] - hib[neg]) / coef[neg]
        steps[steps < 0.0] = 0.0  # guard tiny negative drift

        own = self.hi[enter] - self.lo[enter]  # inf when either bound is open
        best = steps.min() if self.m else np.inf
        if own <= best:
            return own, -1, True
        if best == np.inf:
            return np.inf, -1, False
        ties = np.flatnonzero(steps <= best + _PIVOT_TOL)
        if self.bland:
            leave_pos = int(ties[np.argmin(self.basis[ties])])
        else:
            leave_pos = int(ties[np.argmax(np.abs(coef[ties]))])
        return max(best, 0.0), leave_pos, False

    def _update_binv(self, w: np.ndarray, r: int):
        pivot = w[r]
        if abs(pivot) < _PIVOT_TOL:
            raise NumericalFailureError("pivot element below tolerance")
        self.binv[r, :] /= pivot
        others = np.arange(self.m) != r
        self.binv[others, :] -= np.outer(w[others], self.binv[r, :])
