"""LP-based branch-and-bound with outer approximation of the cone rows.

All four formulations are searched on one scale: the shifted minimization
value ``revenue_shift - revenue``.  Cone rows ``a * b >= q**2`` enter the
node LPs only through tangent cuts of the convex function ``q**2 / b``; cuts
are globally valid, so they live in a single pool shared by every node.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lp
from .instance import Instance, expected_revenue, is_feasible
from .model import AbstractModel

OPTIMAL, TIME_LIMIT, INFEASIBLE, NODE_LIMIT = "optimal", "time-limit", "infeasible", "node-limit"


@dataclass
class SolveConfig:
    time_limit: float = 600.0
    rel_gap: float = 1e-4
    abs_gap: float = 1e-9
    int_tol: float = 1e-6
    cone_tol: float = 1e-6
    max_oa_rounds: int = 50
    max_root_oa_rounds: int = 2000
    node_selection: str = "best-bound"
    branching: str = "most-fractional"
    lp_backend: str = "simplex"
    node_limit: int | None = None
    root_only: bool = False
    keep_cuts: bool = False
    # nonbinding cuts are dropped from the LP once more than this many are loaded (None: automatic)
    cut_limit: int | None = None
    node_log: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if min(self.time_limit, self.int_tol, self.cone_tol) <= 0 or self.rel_gap < 0 or self.abs_gap < 0:
            raise ValueError("tolerances and limits must be positive")
        if self.node_selection not in ("best-bound", "depth-first"):
            raise ValueError("node_selection must be best-bound or depth-first")
        if self.branching not in ("most-fractional", "max-revenue-weight"):
            raise ValueError("unknown branching rule")
        if self.lp_backend not in ("simplex", "highs"):
            raise ValueError("lp_backend must be simplex or highs")


@dataclass
class SolveReport:
    status: str
    formulation: str
    assortment: list[int]
    revenue: float
    best_bound: float
    zroot: float
    zbb: float
    zinc: float
    revenue_shift: float
    nodes: int
    cuts: int
    seconds: float
    lp_iterations: int = 0
    root_oa_rounds: int = 0
    root_cone_violation: float = 0.0
    root_seconds: float = 0.0
    incumbent_history: list = field(default_factory=list)
    cut_pool: list | None = field(default=None, repr=False)

    @property
    def root_bound(self) -> float:
        """Root relaxation on the revenue scale."""
        return self.revenue_shift - self.zroot

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("cut_pool", None)
        d["root_bound"] = self.root_bound
        return d


# cuts -------------------------------------------------------------------------

def separate_cone_cuts(point, cone_a, cone_b, cone_q, tol: float = 1e-6, b_floor=None):
    """Tangent cuts for every cone row violated by more than ``tol``.

    For ``a * b >= q**2`` at a point with ``b = bh`` and ``q = qh`` the cut is
    ``a >= 2 (qh/bh) q - (qh/bh)**2 b``; with the constant ``q = 1`` it is
    ``a >= 2/bh - b/bh**2``.  ``b_floor`` (per row) clamps ``bh`` from below.
    Cuts come back as ``(cols, vals, ">=", rhs)`` rows.
    """
    v = np.asarray(point, float)
    cone_a, cone_b, cone_q = map(np.asarray, (cone_a, cone_b, cone_q))
    if cone_a.size == 0:
        return []
    has_q = cone_q >= 0
    qh = np.where(has_q, v[np.maximum(cone_q, 0)], 1.0)
    ah, bh = v[cone_a], v[cone_b]
    viol = qh * qh - ah * bh
    rows = []
    floor = np.full(cone_a.size, 1e-12) if b_floor is None else np.maximum(np.asarray(b_floor, float), 1e-12)
    for k in np.flatnonzero(viol > tol):
        b = max(bh[k], floor[k])
        r = qh[k] / b
        if has_q[k]:
            rows.append(((int(cone_a[k]), int(cone_q[k]), int(cone_b[k])), (1.0, -2.0 * r, r * r), ">=", 0.0))
        else:
            rows.append(((int(cone_a[k]), int(cone_b[k])), (1.0, 1.0 / (b * b)), ">=", 2.0 / b))
    return rows


def primal_heuristic(x_hat, inst: Instance, int_tol: float = 1e-6) -> frozenset[int] | None:
    """Admit products by decreasing ``x_hat`` while every capacity row stays satisfied."""
    x_hat = np.asarray(x_hat, float)
    order = np.argsort(-x_hat, kind="mergesort")
    beta, kappa = inst.capacity_matrix()
    used = np.zeros(kappa.size)
    chosen = []
    for j in order:
        if x_hat[j] <= int_tol:
            break
        if np.all(used + beta[:, j] <= kappa + 1e-9):
            used += beta[:, j]
            chosen.append(int(j))
    s = frozenset(chosen)
    return s if is_feasible(inst, s) else None


def compute_gaps(report: SolveReport, zopt_reference: float) -> tuple[float, float]:
    """Root and end gaps in percent, on the shifted minimization scale."""
    if zopt_reference == 0:
        raise ZeroDivisionError("gap reference value is zero")
    ref = abs(zopt_reference)
    return 100.0 * abs(zopt_reference - report.zroot) / ref, 100.0 * abs(zopt_reference - report.zbb) / ref


# LP adapters -------------------------------------------------------------------

class _HighsEngine:
    """Cold-start HiGHS with the same editing surface as ``lp.DualSimplex``."""

    def __init__(self, problem: lp.LpProblem):
        self.problem = problem
        self.basis = None
        self.iterations = 0

    def set_col_bounds(self, lo, hi):
        p = self.problem
        self.problem = lp.LpProblem(p.A, p.sense_rows, p.rhs, p.c, lo.copy(), hi.copy(), p.sense)

    def add_rows(self, rows):
        self.problem = self.problem.with_rows(rows)

    def load_basis(self, basis):
        pass

    def solve(self):
        sol = lp.solve_highs(self.problem)
        self.iterations += sol.iterations
        return sol


@dataclass(order=True)
class _Node:
    key: tuple
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    basis: object = field(compare=False, default=None)


class BranchAndBound:
    def __init__(self, model: AbstractModel, config: SolveConfig | None = None, inst: Instance | None = None):
        inst = inst if inst is not None else model.instance
        if inst is None:
            raise ValueError("model carries no instance; pass inst explicitly")
        self.model = model
        self.inst = inst
        self.cfg = config or SolveConfig()
        c, self.const = model.min_scale_objective()
        self.c = c
        A = model.matrix()
        self.problem = lp.LpProblem(A, np.array(model.row_sense, dtype=object), np.array(model.row_rhs),
                                    c, np.array(model.lb), np.array(model.ub), "min")
        self.engine = lp.DualSimplex(self.problem) if self.cfg.lp_backend == "simplex" else _HighsEngine(self.problem)
        self.cone_a, self.cone_b, self.cone_q = model.cone_arrays()
        self.b_floor = np.asarray(model.lb)[self.cone_b] if self.cone_b.size else None
        self.x_idx = model.x_idx
        self.weight = (inst.gamma[:, None] * inst.nu * inst.rho).sum(axis=0)
        self.cuts: list = []
        self.base_rows = A.shape[0]
        n_cones = int(self.cone_a.size)
        self.cut_limit = self.cfg.cut_limit if self.cfg.cut_limit is not None else max(100, 2 * n_cones)
        self.inc_val = math.inf
        self.inc_set: frozenset[int] | None = None
        self.history: list = []
        self.t0 = 0.0

    # helpers ----------------------------------------------------------------
    def _closed(self, bound: float) -> bool:
        """True once ``bound`` is within the gap of the incumbent (relative to the bound)."""
        return bound >= self.inc_val - max(self.cfg.abs_gap, self.cfg.rel_gap * abs(bound))

    def _try_incumbent(self, s) -> None:
        if s is None:
            return
        val = self.inst.revenue_shift - expected_revenue(self.inst, s)
        if val < self.inc_val - 1e-12:
            self.inc_val = val
            self.inc_set = frozenset(s)
            self.history.append((time.perf_counter() - self.t0, self.inst.revenue_shift - val))

    def _lp_value(self, sol) -> float:
        return self.const + float(self.c @ sol.x)

    def _oa(self, rounds: int, prune: bool = True):
        """Solve, cut, re-solve until no cone row is violated or the round budget is spent."""
        sol = self.engine.solve()
        done = 0
        while sol.status == lp.OPTIMAL and self.cone_a.size:
            cuts = separate_cone_cuts(sol.x, self.cone_a, self.cone_b, self.cone_q, self.cfg.cone_tol, self.b_floor)
            if not cuts:
                return sol, done, True
            if done >= rounds:
                return sol, done, False
            if prune and self._closed(self._lp_value(sol)):
                # cuts only raise the bound; this node is already closed
                return sol, done, False
            self._purge()
            self.engine.add_rows(cuts)
            self.cuts.extend(cuts)
            done += 1
            sol = self.engine.solve()
        return sol, done, sol.status == lp.OPTIMAL

    def _purge(self) -> None:
        eng = self.engine
        if isinstance(eng, lp.DualSimplex) and eng.m - self.base_rows > self.cut_limit:
            eng.delete_rows(eng.slack_rows(self.base_rows))

    def _branch_var(self, xh: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> int:
        frac = np.minimum(xh, 1.0 - xh)
        cand = np.flatnonzero(frac > self.cfg.int_tol)
        if cand.size == 0:
            free = np.flatnonzero(lo[self.x_idx] < hi[self.x_idx])
            if free.size == 0:
                return -1
            return int(free[np.argmax(self.weight[free])])
        if self.cfg.branching == "max-revenue-weight":
            w = self.weight[cand]
            return int(cand[np.flatnonzero(w >= w.max() - 1e-12)[0]])
        f = frac[cand]
        top = cand[f >= f.max() - 1e-9]
        w = self.weight[top]
        return int(top[np.flatnonzero(w >= w.max() - 1e-12)[0]])

    def _key(self, bound: float, depth: int, seq: int, plunge: bool) -> tuple:
        if plunge or self.cfg.node_selection == "depth-first":
            return (-depth, bound, seq)
        return (bound, seq)

    # search -----------------------------------------------------------------
    def solve(self) -> SolveReport:
        cfg = self.cfg
        self.t0 = time.perf_counter()
        deadline = self.t0 + cfg.time_limit
        lo0 = np.array(self.model.lb)
        hi0 = np.array(self.model.ub)
        counter = itertools.count()
        iters0 = self.engine.iterations

        # root
        self.engine.set_col_bounds(lo0, hi0)
        sol, rounds, _ = self._oa(cfg.max_root_oa_rounds, prune=False)
        root_secs = time.perf_counter() - self.t0
        if sol.status == lp.INFEASIBLE:
            return self._report(INFEASIBLE, math.inf, math.inf, 1, rounds, 0.0, root_secs)
        zroot = self._lp_value(sol)
        root_viol = self._cone_violation(sol.x)
        root_basis = sol.basis
        xh = sol.x[self.x_idx]
        self._try_incumbent(primal_heuristic(xh, self.inst, cfg.int_tol))
        if cfg.root_only:
            status = OPTIMAL if self._closed(zroot) else NODE_LIMIT
            return self._report(status, zroot, zroot, 1, rounds, root_viol, root_secs)

        plunge = self.inc_set is None
        heap = [_Node(self._key(zroot, 0, next(counter), plunge), lo0, hi0, zroot, 0, root_basis)]
        nodes = 0
        status = OPTIMAL
        first = True
        pruned = math.inf  # smallest bound among leaves closed by the gap test
        while heap:
            if plunge and self.inc_set is not None:
                plunge = False
                for nd in heap:
                    nd.key = self._key(nd.bound, nd.depth, nd.key[-1], False)
                heapq.heapify(heap)
            best_open = min(nd.bound for nd in heap)
            if self._closed(best_open):
                pruned = min(pruned, best_open)
                heap.clear()
                break
            if time.perf_counter() > deadline:
                status = TIME_LIMIT
                break
            if cfg.node_limit is not None and nodes >= cfg.node_limit:
                status = NODE_LIMIT
                break
            node = heapq.heappop(heap)
            if self._closed(node.bound):
                pruned = min(pruned, node.bound)
                continue
            nodes += 1
            if first:
                # the root LP is already solved and cut
                first = False
                bound = zroot
            else:
                self.engine.set_col_bounds(node.lo, node.hi)
                self.engine.load_basis(node.basis)
                sol, _, _ = self._oa(cfg.max_oa_rounds)
                if sol.status == lp.INFEASIBLE:
                    self._log(node, math.inf)
                    continue
                if sol.status != lp.OPTIMAL:
                    # unsolved node LP: keep the parent bound and split anyway
                    sol = None
                bound = max(self._lp_value(sol), node.bound) if sol is not None else node.bound
            self._log(node, bound)
            if sol is None:
                xh = 0.5 * (node.lo[self.x_idx] + node.hi[self.x_idx])
            else:
                xh = sol.x[self.x_idx]
                self._try_incumbent(primal_heuristic(xh, self.inst, cfg.int_tol))
            if self._closed(bound):
                pruned = min(pruned, bound)
                continue
            frac = np.minimum(xh, 1.0 - xh)
            if sol is not None and np.all(frac <= cfg.int_tol):
                s = frozenset(int(j) for j in np.flatnonzero(xh > 0.5))
                if is_feasible(self.inst, s):
                    self._try_incumbent(s)
                    if self._closed(bound):
                        pruned = min(pruned, bound)
                        continue
                    # integral but the cone rows are not yet tight: cut further at this node
                    sol2, _, _ = self._oa(cfg.max_root_oa_rounds)
                    if sol2.status == lp.OPTIMAL:
                        bound = max(bound, self._lp_value(sol2))
                        sol = sol2
                        xh = sol.x[self.x_idx]
                        if self._closed(bound):
                            pruned = min(pruned, bound)
                            continue
            j = self._branch_var(xh, node.lo, node.hi)
            if j < 0:
                continue
            col = self.x_idx[j]
            basis = sol.basis if sol is not None else node.basis
            for val in (1.0, 0.0) if xh[j] >= 0.5 else (0.0, 1.0):
                lo, hi = node.lo.copy(), node.hi.copy()
                lo[col] = hi[col] = val
                heapq.heappush(heap, _Node(self._key(bound, node.depth + 1, next(counter), plunge),
                                           lo, hi, bound, node.depth + 1, basis))
        zbb = min([self.inc_val, pruned] + [nd.bound for nd in heap])
        if status == OPTIMAL and self.inc_set is None:
            status = INFEASIBLE
        rep = self._report(status, zroot, zbb, nodes, rounds, root_viol, root_secs)
        rep.lp_iterations = self.engine.iterations - iters0
        return rep

    def _cone_violation(self, v) -> float:
        if not self.cone_a.size:
            return 0.0
        qv = np.where(self.cone_q >= 0, v[np.maximum(self.cone_q, 0)], 1.0)
        return float(max((qv * qv - v[self.cone_a] * v[self.cone_b]).max(), 0.0))

    def _log(self, node: _Node, bound: float) -> None:
        if self.cfg.node_log is not None:
            self.cfg.node_log.append((node.lo[self.x_idx].copy(), node.hi[self.x_idx].copy(), bound))

    def _report(self, status, zroot, zbb, nodes, rounds, root_viol, root_secs) -> SolveReport:
        shift = self.inst.revenue_shift
        inc = sorted(self.inc_set) if self.inc_set is not None else []
        revenue = shift - self.inc_val if self.inc_set is not None else -math.inf
        return SolveReport(
            status=status,
            formulation=self.model.kind.value if self.model.kind else "custom",
            assortment=inc,
            revenue=revenue,
            best_bound=shift - zbb,
            zroot=zroot,
            zbb=zbb,
            zinc=self.inc_val,
            revenue_shift=shift,
            nodes=nodes,
            cuts=len(self.cuts),
            seconds=time.perf_counter() - self.t0,
            root_oa_rounds=rounds,
            root_cone_violation=root_viol,
            root_seconds=root_secs,
            incumbent_history=list(self.history),
            cut_pool=list(self.cuts) if self.cfg.keep_cuts else None,
        )


def solve(model: AbstractModel, config: SolveConfig | None = None) -> SolveReport:
    return BranchAndBound(model, config).solve()
