"""Dense two-phase revised simplex for desk-scale linear programs.

Solves ``min c.x  s.t.  A_i x {=, <=} b_i,  x >= 0`` and returns an
optimal basic solution together with the exact complementary duals
``y = c_B B^{-T}``. The explicit basis inverse is maintained by rank-1
updates and refactorized periodically. Pivoting uses Dantzig's rule
with a Bland's-rule fallback after a run of degenerate pivots, so the
method cannot cycle.

This backend is meant for restricted master problems and small direct
LPs; large models should go through the HiGHS adapter instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError

# Pivot tolerances. Entering uses a relative threshold on reduced costs;
# ratio-test pivots below _PIVOT_TOL are treated as zero.
_PIVOT_TOL = 1e-10
_STALL_LIMIT = 60
_REFACTOR_EVERY = 128

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int
    duality_gap: float


def solve_dense(c, A, b, senses, max_iterations: int | None = None) -> SimplexResult:
    """Solve ``min c.x`` subject to ``A x (senses) b`` and ``x >= 0``.

    Args:
        c: Objective coefficients, shape (n,).
        A: Dense constraint matrix, shape (m, n).
        b: Right-hand sides, shape (m,).
        senses: Per-row sense, "E" (equality) or "L" (<=).
        max_iterations: Pivot budget; defaults to a generous bound.

    Returns:
        SimplexResult with duals in the caller's row convention
        (equality duals free, <= duals nonpositive at optimality).
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    senses = list(senses)
    m, n = A.shape if A.ndim == 2 else (0, c.size)
    if m == 0:
        if np.any(c < 0):
            return SimplexResult(UNBOUNDED, np.zeros(n), np.zeros(0), -np.inf, 0, 0.0)
        return SimplexResult(OPTIMAL, np.zeros(n), np.zeros(0), 0.0, 0, 0.0)
    if len(senses) != m or b.shape != (m,):
        raise InternalError("inconsistent LP dimensions")

    # Normalize to b >= 0; flipped <= rows become >= rows.
    mult = np.where(b < 0, -1.0, 1.0)
    A = A * mult[:, None]
    b = b * mult
    norm_senses = []
    for i, s in enumerate(senses):
        if s == "E":
            norm_senses.append("E")
        elif s == "L":
            norm_senses.append("G" if mult[i] < 0 else "L")
        else:
            raise InternalError(f"unsupported row sense {s!r}")

    # Extended columns: structural | slack/surplus | artificial.
    slack_rows = [i for i, s in enumerate(norm_senses) if s in ("L", "G")]
    art_rows = [i for i, s in enumerate(norm_senses) if s in ("E", "G")]
    n_slack, n_art = len(slack_rows), len(art_rows)
    total = n + n_slack + n_art
    A_ext = np.zeros((m, total))
    A_ext[:, :n] = A
    for j, i in enumerate(slack_rows):
        A_ext[i, n + j] = 1.0 if norm_senses[i] == "L" else -1.0
    for j, i in enumerate(art_rows):
        A_ext[i, n + n_slack + j] = 1.0

    basis = np.empty(m, dtype=np.int64)
    for j, i in enumerate(slack_rows):
        if norm_senses[i] == "L":
            basis[i] = n + j
    for j, i in enumerate(art_rows):
        basis[i] = n + n_slack + j

    banned = np.zeros(total, dtype=bool)
    state = _CoreState(A_ext, b, basis, banned)
    if max_iterations is None:
        max_iterations = 20000 + 50 * (m + n)

    # Phase 1: minimize the sum of artificials.
    if n_art:
        c1 = np.zeros(total)
        c1[n + n_slack:] = 1.0
        status = _iterate(state, c1, max_iterations)
        if status == UNBOUNDED:
            raise InternalError("phase-1 objective is bounded by construction")
        phase1_obj = float(c1[state.basis] @ state.xB)
        if phase1_obj > 1e-7 * (1.0 + float(np.abs(b).max(initial=0.0))):
            return SimplexResult(INFEASIBLE, np.zeros(n), np.zeros(m), np.inf,
                                 state.iterations, 0.0)
        _expel_artificials(state, n + n_slack)
        state.banned[n + n_slack:] = True

    # Phase 2: original objective; artificials are banned and, if still
    # basic on redundant rows, pinned at value zero with zero cost.
    c2 = np.zeros(total)
    c2[:n] = c
    status = _iterate(state, c2, max_iterations)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, np.zeros(n), np.zeros(m), -np.inf,
                             state.iterations, 0.0)

    x = np.zeros(total)
    x[state.basis] = np.maximum(state.xB, 0.0)
    y_norm = c2[state.basis] @ state.Binv
    duals = y_norm * mult
    objective = float(c2[state.basis] @ state.xB)
    gap = abs(objective - float(y_norm @ b))
    return SimplexResult(OPTIMAL, x[:n], duals, objective, state.iterations, gap)


class _CoreState:
    """Mutable simplex state: extended matrix, basis, basis inverse."""

    def __init__(self, A_ext, b, basis, banned):
        self.A_ext = A_ext
        self.b = b
        self.basis = basis
        self.banned = banned
        self.iterations = 0
        self._pivots_since_refactor = 0
        self.refactor()

    def refactor(self):
        B = self.A_ext[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise InternalError(f"singular basis matrix: {exc}") from exc
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-12] = 0.0
        self._pivots_since_refactor = 0

    def pivot(self, entering: int, leaving_row: int, d: np.ndarray, theta: float):
        dpr = d[leaving_row]
        self.xB -= theta * d
        self.xB[leaving_row] = theta
        self.xB[np.abs(self.xB) < 1e-13] = 0.0
        self.Binv[leaving_row, :] /= dpr
        col = d.copy()
        col[leaving_row] = 0.0
        self.Binv -= np.outer(col, self.Binv[leaving_row, :])
        self.basis[leaving_row] = entering
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= _REFACTOR_EVERY:
            self.refactor()


def _iterate(state: _CoreState, cost: np.ndarray, max_iterations: int) -> str:
    """Run primal simplex pivots until optimal or unbounded."""
    A_ext = state.A_ext
    tol_enter = 1e-9 * (1.0 + float(np.abs(cost).max(initial=0.0)))
    stall = 0
    bland = False
    last_obj = np.inf
    while True:
        if state.iterations >= max_iterations:
            raise InternalError(f"simplex exceeded {max_iterations} pivots")
        y = cost[state.basis] @ state.Binv
        reduced = cost - y @ A_ext
        reduced[state.basis] = 0.0
        candidates = np.flatnonzero(~state.banned & (reduced < -tol_enter))
        if candidates.size == 0:
            return OPTIMAL
        if bland:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmin(reduced[candidates])])
        d = state.Binv @ A_ext[:, j]
        positive = np.flatnonzero(d > _PIVOT_TOL)
        if positive.size == 0:
            return UNBOUNDED
        ratios = np.maximum(state.xB[positive], 0.0) / d[positive]
        best = ratios.min()
        # Tie-break on the smallest basis variable index (Bland-safe).
        tied = positive[np.flatnonzero(ratios <= best + 1e-12)]
        leaving_row = int(tied[np.argmin(state.basis[tied])])
        theta = max(float(state.xB[leaving_row] / d[leaving_row]), 0.0)
        state.pivot(j, leaving_row, d, theta)
        state.iterations += 1

        obj = float(cost[state.basis] @ state.xB)
        if theta <= 1e-12 or obj >= last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            bland = False
        last_obj = obj


def _expel_artificials(state: _CoreState, first_art: int) -> None:
    """Pivot basic artificials out where possible; redundant rows keep
    theirs pinned at zero."""
    for row in range(state.basis.size):
        if state.basis[row] < first_art:
            continue
        tableau_row = state.Binv[row, :] @ state.A_ext[:, :first_art]
        nz = np.flatnonzero(np.abs(tableau_row) > 1e-9)
        choices = [j for j in nz if j not in set(state.basis.tolist())]
        if not choices:
            continue
        j = int(choices[0])
        d = state.Binv @ state.A_ext[:, j]
        state.pivot(j, row, d, max(float(state.xB[row] / d[row]), 0.0))
        state.iterations += 1
