"""Sparse LP interchange structure and the pluggable solver backends.

Every LP in the package is expressed as a :class:`SparseLp` (row/col/
value triplets, row senses, nonnegative variables, minimization) and
handed to an :class:`LpBackend`. Two backends ship:

* ``builtin``: the dense two-phase revised simplex from
  :mod:`mcflow.simplex`. Always available, intended for restricted
  master problems and desk-scale direct LPs.
* ``highs``: the HiGHS solver behind :func:`scipy.optimize.linprog`,
  for models too large to densify.

Both report duals in the same convention: equality duals are free,
``<=`` duals are nonpositive at optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import BackendError, InternalError

OPTIMAL = simplex.OPTIMAL
INFEASIBLE = simplex.INFEASIBLE
UNBOUNDED = simplex.UNBOUNDED

# Densifying beyond these sizes is refused by the builtin backend.
DEFAULT_MAX_NNZ = 2_000_000
DEFAULT_MAX_DENSE = 30_000_000


@dataclass
class SparseLp:
    """``min obj.x  s.t.  A x (senses) rhs,  x >= 0`` in triplet form.

    Attributes:
        num_cols: Number of variables.
        objective: Objective coefficients, shape (num_cols,).
        senses: Per-row sense string, "E" or "L".
        rhs: Per-row right-hand side.
        rows/cols/vals: Coefficient triplets; duplicate entries add up.
        col_names/row_names: Optional labels used by text export.
    """

    num_cols: int
    objective: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    col_names: list[str] | None = None
    row_names: list[str] | None = None

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def validate(self) -> None:
        if self.objective.shape != (self.num_cols,):
            raise InternalError("objective length mismatch")
        if self.rhs.shape != (self.num_rows,):
            raise InternalError("rhs length mismatch")
        if not (self.rows.size == self.cols.size == self.vals.size):
            raise InternalError("triplet arrays differ in length")
        if self.rows.size and (self.rows.min() < 0 or self.rows.max() >= self.num_rows):
            raise InternalError("triplet row index out of range")
        if self.cols.size and (self.cols.min() < 0 or self.cols.max() >= self.num_cols):
            raise InternalError("triplet col index out of range")

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.num_rows, self.num_cols))
        np.add.at(A, (self.rows, self.cols), self.vals)
        return A


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    duals: np.ndarray
    duality_gap: float = 0.0


class LpBackend:
    """Interface every LP backend implements."""

    name: str = "abstract"
    supports_warm_start: bool = False

    def solve(self, lp: SparseLp) -> LpSolution:
        raise NotImplementedError


class SimplexBackend(LpBackend):
    """Adapter for the builtin dense revised simplex."""

    name = "builtin"
    supports_warm_start = False

    def __init__(self, max_nnz: int = DEFAULT_MAX_NNZ,
                 max_dense_entries: int = DEFAULT_MAX_DENSE):
        self.max_nnz = max_nnz
        self.max_dense_entries = max_dense_entries

    def solve(self, lp: SparseLp) -> LpSolution:
        lp.validate()
        if lp.nnz > self.max_nnz:
            raise BackendError(
                f"model has {lp.nnz} nonzeros, above the builtin limit of "
                f"{self.max_nnz}; use the 'highs' backend")
        if lp.num_rows * lp.num_cols > self.max_dense_entries:
            raise BackendError(
                f"dense model would need {lp.num_rows}x{lp.num_cols} entries; "
                "use the 'highs' backend")
        result = simplex.solve_dense(lp.objective, lp.to_dense(), lp.rhs, lp.senses)
        return LpSolution(result.status, result.objective, result.x,
                          result.duals, result.duality_gap)


class HighsBackend(LpBackend):
    """Adapter for HiGHS via :func:`scipy.optimize.linprog`."""

    name = "highs"
    supports_warm_start = False

    def solve(self, lp: SparseLp) -> LpSolution:
        from scipy import sparse
        from scipy.optimize import linprog

        lp.validate()
        senses = np.asarray(lp.senses)
        eq_idx = np.flatnonzero(senses == "E")
        ub_idx = np.flatnonzero(senses == "L")
        row_map = np.empty(lp.num_rows, dtype=np.int64)
        row_map[eq_idx] = np.arange(eq_idx.size)
        row_map[ub_idx] = np.arange(ub_idx.size)
        is_eq = np.zeros(lp.num_rows, dtype=bool)
        is_eq[eq_idx] = True

        matrix = sparse.csr_matrix(
            (lp.vals, (lp.rows, lp.cols)), shape=(lp.num_rows, lp.num_cols))
        A_eq = matrix[eq_idx] if eq_idx.size else None
        A_ub = matrix[ub_idx] if ub_idx.size else None
        res = linprog(lp.objective,
                      A_ub=A_ub, b_ub=lp.rhs[ub_idx] if ub_idx.size else None,
                      A_eq=A_eq, b_eq=lp.rhs[eq_idx] if eq_idx.size else None,
                      bounds=(0, None), method="highs")
        if res.status == 2:
            return LpSolution(INFEASIBLE, np.inf, np.zeros(lp.num_cols),
                              np.zeros(lp.num_rows))
        if res.status == 3:
            return LpSolution(UNBOUNDED, -np.inf, np.zeros(lp.num_cols),
                              np.zeros(lp.num_rows))
        if res.status != 0:
            raise BackendError(f"HiGHS failed: {res.message}")
        duals = np.zeros(lp.num_rows)
        if eq_idx.size:
            duals[eq_idx] = res.eqlin.marginals
        if ub_idx.size:
            duals[ub_idx] = res.ineqlin.marginals
        dual_obj = float(duals @ lp.rhs)
        return LpSolution(OPTIMAL, float(res.fun), np.asarray(res.x), duals,
                          abs(float(res.fun) - dual_obj))


_BACKENDS = {"builtin": SimplexBackend, "highs": HighsBackend}


def get_backend(name: str | LpBackend = "builtin") -> LpBackend:
    """Resolve a backend by name; instances pass through unchanged."""
    if isinstance(name, LpBackend):
        return name
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise BackendError(f"unknown LP backend {name!r}; "
                           f"available: {sorted(_BACKENDS)}") from None
