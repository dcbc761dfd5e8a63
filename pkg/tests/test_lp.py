import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from assortopt.lp import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, DualSimplex, LpProblem, add_rows_resolve, solve,
                          solve_highs)
from assortopt.model import build_milp
from conftest import make_toy


def _random_lp(rng, m=None, n=None, infeasible=False):
    m = m or int(rng.integers(1, 25))
    n = n or int(rng.integers(1, 25))
    A = sp.random(m, n, density=0.4, random_state=int(rng.integers(1 << 30))).toarray() * rng.choice([-1, 1], (m, n))
    sense = rng.choice(["<=", ">=", "="], m, p=[0.5, 0.35, 0.15])
    x0 = rng.uniform(0, 1, n)
    slack = np.where(sense == "<=", 1, np.where(sense == ">=", -1, 0)) * rng.uniform(0, 1, m)
    rhs = A @ x0 + slack
    if infeasible:
        rhs = rhs + rng.normal(0, 3, m)
    return LpProblem(A, sense, rhs, rng.normal(size=n), np.zeros(n), np.full(n, rng.uniform(0.5, 2)),
                     str(rng.choice(["min", "max"])))


def _same(a, b):
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)


def _primal_ok(p, x, tol=1e-7):
    act = p.A @ x
    lo, hi = p.row_bounds()
    return (np.all(act >= lo - tol) and np.all(act <= hi + tol)
            and np.all(x >= p.col_lo - tol) and np.all(x <= p.col_hi + tol))


def test_single_binding_row():
    p = LpProblem([[1.0, 1.0]], ["<="], [1.0], [1.0, 1.0], [0, 0], [1, 1], "max")
    s = solve(p)
    assert s.status == OPTIMAL and s.objective == pytest.approx(1.0)


def test_no_rows():
    c = np.array([1.0, -2.0, 0.5, 0.0])
    p = LpProblem(sp.csr_matrix((0, 4)), [], [], c, np.zeros(4), np.ones(4), "max")
    s = solve(p)
    assert s.status == OPTIMAL
    assert np.array_equal(s.x[c > 0], [1.0, 1.0]) and s.x[1] == 0.0


def test_infinite_bounds_rejected():
    with pytest.raises(ValueError):
        LpProblem([[1.0]], ["<="], [1.0], [1.0], [0.0], [np.inf])
    with pytest.raises(ValueError):
        LpProblem([[1.0]], ["<="], [1.0], [1.0], [0.0], [1.0], "maximize")


def test_infeasible():
    p = LpProblem([[1.0, 1.0]], [">="], [3.0], [1.0, 1.0], [0, 0], [1, 1])
    assert solve(p).status == INFEASIBLE


def _vertex_optimum(p):
    """Best objective over all basic solutions, by brute force."""
    A = p.A.toarray()
    m, n = A.shape
    lo, hi = p.row_bounds()
    faces = []  # (coefficient row, value)
    for i in range(m):
        for v in {lo[i], hi[i]} - {-np.inf, np.inf}:
            faces.append((A[i], v))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1
        faces += [(e, p.col_lo[j]), (e, p.col_hi[j])]
    best = -np.inf
    sign = 1 if p.sense == "max" else -1
    for pick in itertools.combinations(range(len(faces)), n):
        M = np.array([faces[k][0] for k in pick])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, [faces[k][1] for k in pick])
        if _primal_ok(p, x, 1e-9):
            best = max(best, sign * p.c @ x)
    return sign * best


def test_toy_milp_relaxation_matches_vertex_enumeration():
    model = build_milp(make_toy())
    p = LpProblem(model.matrix(), np.array(model.row_sense, dtype=object), model.row_rhs, model.objective,
                  model.lb, model.ub, "max")
    s = solve(p)
    assert s.status == OPTIMAL
    assert s.objective == pytest.approx(_vertex_optimum(p), abs=1e-9)


@pytest.mark.parametrize("dense_limit", [0, 1000])
def test_random_against_highs(dense_limit):
    rng = np.random.default_rng(dense_limit + 1)
    for t in range(120):
        p = _random_lp(rng, infeasible=rng.random() < 0.1)
        s = DualSimplex(p, dense_limit=dense_limit).solve()
        _same(s, solve_highs(p))
        if s.status == OPTIMAL:
            assert _primal_ok(p, s.x)
            assert s.objective == pytest.approx(s.dual_objective, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("dense_limit", [0, 1000])
def test_warm_rows_and_bounds_against_highs(dense_limit):
    rng = np.random.default_rng(10 + dense_limit)
    for t in range(80):
        p = _random_lp(rng)
        eng = DualSimplex(p, dense_limit=dense_limit)
        s = eng.solve()
        if s.status != OPTIMAL:
            continue
        n = p.shape[1]
        rows = []
        for _ in range(int(rng.integers(1, 4))):
            cols = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            vals = rng.normal(size=cols.size)
            rows.append((cols, vals, "<=", float(vals @ s.x[cols]) - rng.uniform(0, 0.3)))
        eng.add_rows(rows)
        p2 = p.with_rows(rows)
        _same(eng.solve(), solve_highs(p2))
        lo, hi = p.col_lo.copy(), p.col_hi.copy()
        j = int(rng.integers(n))
        lo[j] = hi[j] = rng.choice([lo[j], hi[j]])
        eng.set_col_bounds(lo, hi)
        _same(eng.solve(), solve_highs(LpProblem(p2.A, p2.sense_rows, p2.rhs, p.c, lo, hi, p.sense)))


def test_inactive_row_keeps_objective():
    p = LpProblem([[1.0, 1.0]], ["<="], [1.0], [1.0, 2.0], [0, 0], [1, 1], "max")
    s = solve(p)
    s2 = add_rows_resolve(s, [([0], [1.0], "<=", 5.0)])
    assert s2.objective == s.objective


def test_tangent_cut_worsens_minimum():
    # columns (y, w); w pinned at 2, y free down to 0.3
    p = LpProblem(sp.csr_matrix((0, 2)), [], [], [1.0, 0.0], [0.3, 2.0], [1.0, 2.0])
    s = solve(p)
    assert s.objective == pytest.approx(0.3)
    cut = ([0, 1], [1.0, 0.25], ">=", 1.0)  # y >= 1 - w/4, tangent to y w >= 1 at w = 2
    s2 = add_rows_resolve(s, [cut])
    assert s2.objective == pytest.approx(0.5) and s2.objective >= s.objective


def test_add_rows_resolve_requires_optimal():
    p = LpProblem([[1.0, 1.0]], [">="], [3.0], [1.0, 1.0], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        add_rows_resolve(solve(p), [([0], [1.0], "<=", 1.0)])


def test_monotone_under_restriction():
    rng = np.random.default_rng(7)
    for _ in range(40):
        p = _random_lp(rng)
        p = LpProblem(p.A, p.sense_rows, p.rhs, p.c, p.col_lo, p.col_hi, "min")
        s = solve(p)
        if s.status != OPTIMAL:
            continue
        n = p.shape[1]
        cols = np.arange(n)
        vals = rng.normal(size=n)
        s2 = add_rows_resolve(s, [(cols, vals, "<=", float(vals @ s.x) + rng.uniform(-0.2, 0.2))])
        if s2.status == OPTIMAL:
            assert s2.objective >= s.objective - 1e-9
        hi = p.col_hi.copy()
        j = int(rng.integers(n))
        hi[j] = p.col_lo[j]
        s3 = solve(LpProblem(p.A, p.sense_rows, p.rhs, p.c, p.col_lo, hi), s.basis)
        if s3.status == OPTIMAL:
            assert s3.objective >= s.objective - 1e-9


def test_deterministic_basis():
    rng = np.random.default_rng(3)
    p = _random_lp(rng, 15, 20)
    a, b = solve(p), solve(p)
    assert np.array_equal(a.basis.head, b.basis.head) and np.array_equal(a.x, b.x)


def test_iteration_limit_reported():
    rng = np.random.default_rng(4)
    p = _random_lp(rng, 20, 20)
    s = DualSimplex(p).solve(max_iter=1)
    assert s.status in (ITERATION_LIMIT, OPTIMAL, INFEASIBLE)
    cold = solve(p)
    assert solve(p, cold.basis).status == cold.status


@pytest.mark.parametrize("dense_limit", [0, 1000])
def test_delete_rows_and_remap(dense_limit):
    rng = np.random.default_rng(20 + dense_limit)
    checked = 0
    for _ in range(60):
        p = _random_lp(rng)
        if p.sense != "min":
            p = LpProblem(p.A, p.sense_rows, p.rhs, p.c, p.col_lo, p.col_hi, "min")
        eng = DualSimplex(p, dense_limit=dense_limit)
        s = eng.solve()
        if s.status != OPTIMAL:
            continue
        n = p.shape[1]
        cuts = []
        for _ in range(4):
            cols = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            vals = rng.normal(size=cols.size)
            cuts.append((cols, vals, "<=", float(vals @ s.x[cols]) + rng.uniform(-0.3, 0.3)))
        eng.add_rows(cuts)
        s2 = eng.solve()
        if s2.status != OPTIMAL:
            continue
        saved = s2.basis
        slack = eng.slack_rows(first=p.shape[0])
        eng.delete_rows(slack)
        keep = [c for k, c in enumerate(cuts) if p.shape[0] + k not in set(slack)]
        s3 = eng.solve()
        # dropping rows that are strictly slack leaves the optimum in place
        assert s3.status == OPTIMAL and s3.objective == pytest.approx(s2.objective, rel=1e-7, abs=1e-7)
        _same(s3, solve_highs(p.with_rows(keep)))
        # a basis saved on the larger row set still warm starts the smaller one
        eng.load_basis(saved)
        _same(eng.solve(), s3)
        checked += 1
    assert checked > 10


def test_delete_rows_needs_basic_logical():
    p = LpProblem([[1.0, 1.0], [1.0, 0.0]], ["<=", "<="], [1.0, 5.0], [1.0, 1.0], [0, 0], [1, 1], "max")
    eng = DualSimplex(p)
    eng.solve()
    with pytest.raises(ValueError):
        eng.delete_rows([0])
    eng.delete_rows([1])
    assert eng.solve().objective == pytest.approx(1.0)


def test_large_sparse_path_matches_highs():
    rng = np.random.default_rng(5)
    p = _random_lp(rng, 60, 80)
    _same(DualSimplex(p, dense_limit=10).solve(), solve_highs(p))
