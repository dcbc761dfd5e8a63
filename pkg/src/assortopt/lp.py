"""Bounded-variable dual simplex for the node relaxations.

Every row ``k`` gets a logical column ``s_k = a_k @ x`` so the system reads
``[A  -I] (x, s) = 0`` with the row sense folded into the bounds of ``s``.
Because every structural column is boxed, the all-logical basis is dual
feasible for any cost vector and the method never needs a phase one.
Warm starts reuse a basis after bound changes or appended rows; both keep
the reduced costs, hence dual feasibility, intact.

Small bases keep an explicit dense inverse (rank-one updates, extended in
closed form when rows are appended); large ones a SuperLU factorization with
a product-form eta file. Both are rebuilt every ``refactor_every`` pivots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import dual_ratio_test, eta_btran, eta_ftran, inverse_update

OPTIMAL, INFEASIBLE, ITERATION_LIMIT = "optimal", "infeasible", "iteration-limit"

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 1000


@dataclass
class LpProblem:
    """``min|max c @ x`` subject to ``A x (sense) rhs`` and ``col_lo <= x <= col_hi``."""

    A: sp.csr_matrix
    sense_rows: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        m, n = self.A.shape
        self.sense_rows = np.asarray(self.sense_rows, dtype=object).reshape(m)
        self.rhs = np.asarray(self.rhs, float).reshape(m)
        self.c = np.asarray(self.c, float).reshape(n)
        self.col_lo = np.asarray(self.col_lo, float).reshape(n)
        self.col_hi = np.asarray(self.col_hi, float).reshape(n)
        if not (np.all(np.isfinite(self.col_lo)) and np.all(np.isfinite(self.col_hi))):
            raise ValueError("structural columns must have finite bounds")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be min or max")

    @property
    def shape(self):
        return self.A.shape

    def row_bounds(self):
        s = self.sense_rows
        lo = np.where((s == ">=") | (s == "="), self.rhs, -np.inf)
        hi = np.where((s == "<=") | (s == "="), self.rhs, np.inf)
        return lo, hi

    def with_rows(self, rows) -> "LpProblem":
        """Copy with rows ``(cols, vals, sense, rhs)`` appended."""
        if not rows:
            return self
        extra = _rows_to_csr(rows, self.A.shape[1])
        return LpProblem(sp.vstack([self.A, extra], format="csr"),
                         np.concatenate([self.sense_rows, [r[2] for r in rows]]),
                         np.concatenate([self.rhs, [r[3] for r in rows]]),
                         self.c, self.col_lo, self.col_hi, self.sense)


def _rows_to_csr(rows, n) -> sp.csr_matrix:
    indptr = np.concatenate(([0], np.cumsum([len(r[0]) for r in rows])))
    cols = np.concatenate([np.asarray(r[0], dtype=np.int64) for r in rows])
    vals = np.concatenate([np.asarray(r[1], dtype=float) for r in rows])
    return sp.csr_matrix((vals, cols, indptr), shape=(len(rows), n))


@dataclass
class Basis:
    """Basic column per row plus the bound each nonbasic column sits at."""

    head: np.ndarray
    at_upper: np.ndarray
    n: int
    row_ids: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.head.size

    def extended(self, m_new: int) -> "Basis":
        """Basis for the same columns after rows were appended: new logicals are basic."""
        extra = m_new - self.m
        if extra < 0:
            raise ValueError("cannot shrink a basis")
        head = np.concatenate([self.head, self.n + self.m + np.arange(extra)])
        return Basis(head, np.concatenate([self.at_upper, np.zeros(extra, bool)]), self.n)

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.at_upper.copy(), self.n,
                     None if self.row_ids is None else self.row_ids.copy())


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    basis: Basis | None
    iterations: int = 0
    row_duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float = math.nan
    problem: LpProblem | None = field(default=None, repr=False)


class SingularBasis(RuntimeError):
    pass


class _DenseInverse:
    """Explicit basis inverse with rank-one updates; cheap to extend when rows are appended."""

    def __init__(self, B: np.ndarray, cap: int):
        try:
            self.inv = np.linalg.inv(B) if B.size else np.zeros((0, 0))
        except np.linalg.LinAlgError as exc:
            raise SingularBasis(str(exc)) from exc
        if not np.all(np.isfinite(self.inv)):
            raise SingularBasis("non-finite inverse")
        self.updates = 0
        self.cap = cap

    def ftran(self, v):
        return self.inv @ v

    def btran(self, v):
        return v @ self.inv

    def btran_unit(self, r):
        return self.inv[r].copy()

    def update(self, r, col) -> bool:
        inverse_update(self.inv, col, r)
        self.updates += 1
        return self.updates < self.cap

    def extend(self, C: np.ndarray) -> None:
        """New rows ``C`` over the current basic columns, each with its own logical basic."""
        m, k = self.inv.shape[0], C.shape[0]
        inv = np.zeros((m + k, m + k))
        inv[:m, :m] = self.inv
        inv[m:, :m] = C @ self.inv
        inv[m:, m:] = -np.eye(k)
        self.inv = inv


class _SparseLU:
    """SuperLU factor followed by a product-form eta file."""

    def __init__(self, B: sp.csc_matrix, cap: int):
        m = B.shape[0]
        try:
            self.lu = spla.splu(B, permc_spec="COLAMD") if m else None
        except RuntimeError as exc:
            raise SingularBasis(str(exc)) from exc
        self.m = m
        self.cap = cap
        self.rows = np.zeros(cap, dtype=np.int64)
        self.cols = np.zeros((cap, m))
        self.k = 0

    def ftran(self, v):
        v = self.lu.solve(np.asarray(v, float)) if self.m else np.asarray(v, float)
        return eta_ftran(np.ascontiguousarray(v), self.rows, self.cols, self.k)

    def btran(self, v):
        v = eta_btran(np.array(v, dtype=float), self.rows, self.cols, self.k)
        return self.lu.solve(v, trans="T") if self.m else v

    def btran_unit(self, r):
        e = np.zeros(self.m)
        e[r] = 1.0
        return self.btran(e)

    def update(self, r, col) -> bool:
        self.rows[self.k] = r
        self.cols[self.k] = col
        self.k += 1
        return self.k < self.cap

    @property
    def updates(self):
        return self.k


class DualSimplex:
    """Reusable engine: load a problem once, then change bounds, add rows and re-solve.

    Bases with at most ``dense_limit`` rows are kept as an explicit dense
    inverse; larger ones use a sparse LU with an eta file.
    """

    def __init__(self, problem: LpProblem, refactor_every: int = 100, dense_limit: int = 1200):
        self.refactor_every = refactor_every
        self.dense_limit = dense_limit
        self.sign = 1.0 if problem.sense == "min" else -1.0
        self.problem = problem
        self.n = problem.A.shape[1]
        self._set_matrix(problem.A)
        self.c = np.concatenate([self.sign * problem.c, np.zeros(self.m)])
        rlo, rhi = problem.row_bounds()
        self.lo = np.concatenate([problem.col_lo, rlo])
        self.hi = np.concatenate([problem.col_hi, rhi])
        self.row_ids = np.arange(self.m)
        self._next_id = self.m
        self.basis = self.slack_basis()
        self.iterations = 0
        self._rep = None

    # problem edits ---------------------------------------------------------
    def _set_matrix(self, A):
        self.m = A.shape[0]
        self.dense = self.m <= self.dense_limit
        if self.dense:
            self.A = A.toarray() if sp.issparse(A) else np.asarray(A, float)
        else:
            self.A = sp.csr_matrix(A)
            self.AT = self.A.T.tocsr()
            self.Acsc = self.A.tocsc()

    def _yA(self, y):
        return y @ self.A if self.dense else self.AT @ y

    def _columns(self, idx):
        return self.A[:, idx] if self.dense else self.Acsc[:, idx].toarray()

    def slack_basis(self) -> Basis:
        at_upper = np.zeros(self.n + self.m, bool)
        at_upper[: self.n] = self.c[: self.n] < 0
        return Basis(self.n + np.arange(self.m), at_upper, self.n)

    def set_col_bounds(self, lo: np.ndarray, hi: np.ndarray) -> None:
        self.lo[: self.n] = lo
        self.hi[: self.n] = hi

    def add_rows(self, rows) -> None:
        """Append rows ``(cols, vals, sense, rhs)``; their logicals enter the basis."""
        if not rows:
            return
        if self.dense:
            extra = np.zeros((len(rows), self.n))
            for k, r in enumerate(rows):
                np.add.at(extra[k], np.asarray(r[0], dtype=np.int64), np.asarray(r[1], float))
        else:
            extra = _rows_to_csr(rows, self.n)
        senses = np.array([r[2] for r in rows], dtype=object)
        rhs = np.array([r[3] for r in rows], float)
        lo = np.where((senses == ">=") | (senses == "="), rhs, -np.inf)
        hi = np.where((senses == "<=") | (senses == "="), rhs, np.inf)
        m_old = self.m
        head = self.basis.head
        self._set_matrix(np.vstack([self.A, extra]) if self.dense else sp.vstack([self.A, extra], format="csr"))
        self.lo = np.concatenate([self.lo, lo])
        self.hi = np.concatenate([self.hi, hi])
        self.c = np.concatenate([self.c, np.zeros(len(rows))])
        self.row_ids = np.concatenate([self.row_ids, self._next_id + np.arange(len(rows))])
        self._next_id += len(rows)
        self.basis = self.basis.extended(self.m)
        if isinstance(self._rep, _DenseInverse) and self.dense:
            C = np.zeros((len(rows), m_old))
            struct = np.flatnonzero(head < self.n)
            if struct.size:
                C[:, struct] = extra[:, head[struct]]
            self._rep.extend(C)
        else:
            self._rep = None

    def delete_rows(self, rows) -> None:
        """Drop rows whose logicals are basic; the rest of the basis carries over."""
        rows = np.unique(np.asarray(rows, dtype=np.int64))
        if rows.size == 0:
            return
        n, m = self.n, self.m
        head = self.basis.head
        where = np.full(n + m, -1)
        where[head] = np.arange(m)
        pos = where[n + rows]
        if np.any(pos < 0):
            raise ValueError("only rows with a basic logical can be deleted")
        keep_row = np.ones(m, bool)
        keep_row[rows] = False
        keep_pos = np.ones(m, bool)
        keep_pos[pos] = False
        renum = np.concatenate([np.arange(n), n + np.cumsum(keep_row) - 1])
        new_head = renum[head[keep_pos]]
        keep_col = np.concatenate([np.ones(n, bool), keep_row])
        self._set_matrix(self.A[keep_row])
        self.lo, self.hi, self.c = self.lo[keep_col], self.hi[keep_col], self.c[keep_col]
        self.row_ids = self.row_ids[keep_row]
        self.basis = Basis(new_head, self.basis.at_upper[keep_col], n)
        if isinstance(self._rep, _DenseInverse):
            self._rep.inv = self._rep.inv[np.ix_(keep_pos, keep_row)]
        else:
            self._rep = None

    def slack_rows(self, first: int = 0, tol: float = 1e-9) -> np.ndarray:
        """Rows from ``first`` on whose logical is basic and strictly inside its bounds."""
        if self._rep is None or not hasattr(self, "xB"):
            return np.zeros(0, dtype=np.int64)
        head = self.basis.head
        lo, hi = self.lo[head], self.hi[head]
        with np.errstate(invalid="ignore"):
            inside = ((np.isinf(lo) | (self.xB > lo + tol * (1 + np.abs(lo))))
                      & (np.isinf(hi) | (self.xB < hi - tol * (1 + np.abs(hi)))))
        rows = head[inside & (head >= self.n + first)] - self.n
        return np.sort(rows)

    def load_basis(self, basis: Basis | None) -> None:
        self._rep = None
        if basis is None:
            self.basis = self.slack_basis()
        elif basis.row_ids is None or (basis.row_ids.size <= self.m
                                       and np.array_equal(basis.row_ids, self.row_ids[: basis.row_ids.size])):
            self.basis = basis.extended(self.m).copy()
        else:
            self.basis = self._remap(basis)

    def _remap(self, basis: Basis) -> Basis:
        """Carry a basis saved on another row set over to the current rows."""
        n, m = self.n, self.m
        saved, cur = basis.row_ids, self.row_ids
        at = np.searchsorted(cur, saved)
        at = np.minimum(at, max(m - 1, 0))
        present = (cur[at] == saved) if m else np.zeros(saved.size, bool)
        new_index = np.where(present, n + at, -1)
        old_head = basis.head
        struct = old_head[old_head < n]
        logical = new_index[old_head[old_head >= n] - n]
        fresh = n + np.flatnonzero(~np.isin(cur, saved))
        head = np.concatenate([struct, logical[logical >= 0], fresh])
        at_upper = np.zeros(n + m, bool)
        at_upper[:n] = basis.at_upper[:n]
        at_upper[new_index[present]] = basis.at_upper[n + np.flatnonzero(present)]
        if head.size > m:
            head = self._independent(head, m)
            if head is None:
                return self.slack_basis()
        out = Basis(head, at_upper, n)
        return out

    def _independent(self, cand: np.ndarray, m: int):
        """Pick ``m`` linearly independent columns among ``cand`` (logicals first)."""
        if m > self.dense_limit:
            return None
        import scipy.linalg as sla

        cand = np.concatenate([cand[cand >= self.n], cand[cand < self.n]])
        M = np.zeros((m, cand.size))
        struct = cand < self.n
        M[:, struct] = self._columns(cand[struct])
        M[cand[~struct] - self.n, np.flatnonzero(~struct)] = -1.0
        _, R, piv = sla.qr(M, mode="economic", pivoting=True)
        if m and abs(R[m - 1, m - 1]) < 1e-9 * max(abs(R[0, 0]), 1.0):
            return None
        return cand[np.sort(piv[:m])]

    # linear algebra -------------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self._columns(j).ravel().astype(float)
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def _factor(self):
        m = self.m
        head = self.basis.head
        structural = head < self.n
        pos = np.flatnonzero(structural)
        slack_pos = np.flatnonzero(~structural)
        if self.dense:
            B = np.zeros((m, m))
            B[:, pos] = self.A[:, head[structural]]
            B[head[~structural] - self.n, slack_pos] = -1.0
            self._rep = _DenseInverse(B, self.refactor_every)
        else:
            sub = self.Acsc[:, head[structural]].tocoo()
            rows = np.concatenate([sub.row, head[~structural] - self.n])
            cols = np.concatenate([pos[sub.col], slack_pos])
            vals = np.concatenate([sub.data, -np.ones(slack_pos.size)])
            B = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
            self._rep = _SparseLU(B, self.refactor_every)

    # state ------------------------------------------------------------------
    def _nonbasic_values(self):
        v = np.where(self.basis.at_upper, self.hi, self.lo)
        v[self.basis.head] = 0.0
        return v

    def _fix_status(self):
        at_upper = self.basis.at_upper
        at_upper[np.isinf(self.lo)] = True
        at_upper[np.isinf(self.hi)] = False

    def _recompute(self):
        v = self._nonbasic_values()
        r = self.A @ v[: self.n] - v[self.n:]
        self.xB = self._rep.ftran(-r)
        cB = self.c[self.basis.head]
        self.pi = self._rep.btran(cB)
        self.d = self.c - np.concatenate([self._yA(self.pi), -self.pi])
        self.d[self.basis.head] = 0.0

    def _residual(self) -> float:
        v = self._nonbasic_values()
        v[self.basis.head] = self.xB
        r = self.A @ v[: self.n] - v[self.n:]
        return float(np.max(np.abs(r), initial=0.0))

    def _repair_dual(self) -> bool:
        """Flip boxed columns with wrong-signed reduced costs; False if a one-sided column is wrong."""
        basic = np.zeros(self.n + self.m, bool)
        basic[self.basis.head] = True
        au = self.basis.at_upper
        bad_lo = ~basic & ~au & (self.d < -DUAL_TOL) & (self.lo < self.hi)
        bad_hi = ~basic & au & (self.d > DUAL_TOL) & (self.lo < self.hi)
        if np.any(bad_lo & np.isinf(self.hi)) or np.any(bad_hi & np.isinf(self.lo)):
            return False
        au[bad_lo] = True
        au[bad_hi] = False
        return True

    # main loop --------------------------------------------------------------
    def solve(self, max_iter: int | None = None) -> LpSolution:
        if max_iter is None:
            max_iter = 50 * (self.m + self.n)
        try:
            return self._solve(max_iter)
        except SingularBasis:
            self.load_basis(None)
            return self._solve(max_iter)

    def _start(self, force_factor=False):
        self._fix_status()
        if self._rep is None or force_factor:
            self._factor()
        self._recompute()
        if not self._repair_dual():
            self.basis = self.slack_basis()
            self._fix_status()
            self._factor()
            self._recompute()
            self._repair_dual()
        self._recompute()

    def _refactor(self):
        self._factor()
        self._recompute()

    def _solve(self, max_iter: int) -> LpSolution:
        self._start()
        it = 0
        degenerate = 0
        cold_restart = False
        while True:
            head = self.basis.head
            lo_b, hi_b = self.lo[head], self.hi[head]
            below = lo_b - self.xB
            above = self.xB - hi_b
            infeas = np.maximum(below, above)
            bland = degenerate >= BLAND_AFTER
            if bland:
                cand = np.flatnonzero(infeas > PRIMAL_TOL)
                r = int(cand[np.argmin(head[cand])]) if cand.size else -1
            else:
                r = int(np.argmax(infeas)) if self.m else -1
                if r >= 0 and infeas[r] <= PRIMAL_TOL:
                    r = -1
            if r < 0:
                # confirm on freshly recomputed values before declaring optimality
                if self._rep.updates:
                    self._recompute()
                    if self._residual() > 1e-9:
                        self._refactor()
                    if np.max(np.maximum(self.lo[head] - self.xB, self.xB - self.hi[head]), initial=0) > PRIMAL_TOL:
                        continue
                if not self._repair_dual():
                    if cold_restart:
                        break
                    cold_restart = True
                    self.load_basis(None)
                    self._start()
                    continue
                self._recompute()
                if np.max(np.maximum(self.lo[head] - self.xB, self.xB - self.hi[head]), initial=0) > PRIMAL_TOL:
                    continue
                return self._finish(OPTIMAL, it)
            if it >= max_iter:
                return self._finish(ITERATION_LIMIT, it)
            direction = 1.0 if below[r] > 0 else -1.0
            rho = self._rep.btran_unit(r)
            alpha = np.concatenate([self._yA(rho), -rho])
            movable = self.lo < self.hi
            movable[head] = False
            q = dual_ratio_test(alpha, self.d, self.basis.at_upper, movable, direction,
                                PIVOT_TOL, DUAL_TOL, bland)
            if q < 0:
                if self._rep.updates:
                    # rule out a stale representation before reporting infeasibility
                    self._refactor()
                    continue
                return self._finish(INFEASIBLE, it)
            col = self._rep.ftran(self._column(q))
            if abs(col[r] - alpha[q]) > 1e-7 * (1.0 + abs(alpha[q])) and self._rep.updates:
                self._refactor()
                continue
            piv = col[r]
            p = head[r]
            target = self.lo[p] if direction > 0 else self.hi[p]
            delta = (self.xB[r] - target) / piv
            theta = self.d[q] / piv
            degenerate = degenerate + 1 if abs(theta) < 1e-12 else 0
            xq = (self.hi[q] if self.basis.at_upper[q] else self.lo[q]) + delta
            self.xB -= col * delta
            self.xB[r] = xq
            self.d -= theta * alpha
            self.d[p] = -theta
            self.d[q] = 0.0
            head[r] = q
            self.basis.at_upper[p] = direction < 0
            self.basis.at_upper[q] = False
            it += 1
            self.iterations += 1
            if not self._rep.update(r, col):
                self._refactor()
        return self._finish(ITERATION_LIMIT, it)

    def _finish(self, status: str, it: int) -> LpSolution:
        v = self._nonbasic_values()
        v[self.basis.head] = self.xB
        x = v[: self.n].copy()
        obj = self.sign * float(self.c[: self.n] @ x)
        dual_obj = math.nan
        if status == OPTIMAL:
            bound = np.where(self.d > 0, self.lo, self.hi)
            bound = np.where(self.d == 0, 0.0, bound)
            dual_obj = self.sign * float(self.d @ bound)
        basis = self.basis.copy()
        basis.row_ids = self.row_ids.copy()
        return LpSolution(status, x, obj, basis, it,
                          self.sign * self.pi, self.sign * self.d[: self.n], dual_obj, None)


def solve(problem: LpProblem, warm_basis: Basis | None = None, max_iter: int | None = None) -> LpSolution:
    """Solve from scratch or from ``warm_basis`` (which may predate appended rows)."""
    eng = DualSimplex(problem)
    if warm_basis is not None:
        eng.load_basis(warm_basis)
    sol = eng.solve(max_iter)
    if sol.status == ITERATION_LIMIT and warm_basis is not None:
        eng = DualSimplex(problem)
        sol = eng.solve(max_iter)
    sol.problem = problem
    return sol


def add_rows_resolve(solution: LpSolution, new_rows) -> LpSolution:
    """Re-solve ``solution.problem`` plus ``new_rows`` starting from the previous basis."""
    if solution.status != OPTIMAL or solution.problem is None:
        raise ValueError("need an optimal solution that remembers its problem")
    return solve(solution.problem.with_rows(new_rows), solution.basis)


def solve_highs(problem: LpProblem) -> LpSolution:
    """Reference backend through scipy's HiGHS interface (no warm start)."""
    from scipy.optimize import linprog

    s = problem.sense_rows
    le, ge, eq = (s == "<="), (s == ">="), (s == "=")
    A = problem.A
    A_ub = sp.vstack([A[le], -A[ge]], format="csr")
    b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]])
    c = problem.c if problem.sense == "min" else -problem.c
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=problem.rhs[eq] if eq.any() else None,
                  bounds=np.column_stack([problem.col_lo, problem.col_hi]), method="highs")
    if res.status == 2:
        return LpSolution(INFEASIBLE, np.full(A.shape[1], np.nan), math.nan, None, problem=problem)
    if res.status != 0:
        return LpSolution(ITERATION_LIMIT, np.full(A.shape[1], np.nan), math.nan, None, problem=problem)
    obj = float(problem.c @ res.x)
    return LpSolution(OPTIMAL, res.x, obj, None, int(res.nit), problem=problem)
