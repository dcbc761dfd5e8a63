"""Hot inner loops, each in two flavours.

The loop versions are compiled with numba when it is importable and the
``ASSORTOPT_NUMBA`` environment variable is not ``0``; otherwise the
vectorized numpy versions are used.  Both flavours are always importable
(``NUMPY_KERNELS`` / ``NUMBA_KERNELS``) so tests and the benchmark script
can compare them directly.
"""
from __future__ import annotations

import contextlib
import os

import numpy as np

ENV_FLAG = "ASSORTOPT_NUMBA"
MAX_ENUM_PRODUCTS = 24
TIE_TOL = 1e-12

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None


def _want_numba() -> bool:
    return _nb is not None and os.environ.get(ENV_FLAG, "1").strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# loop versions (numba targets; also runnable as plain python)


def _lex_smaller(a, b):
    """True when mask ``a`` is lexicographically smaller than ``b`` as sorted index tuples."""
    d = a ^ b
    if d == 0:
        return False
    above = ~(((d & -d) << 1) - 1)
    if a & d & -d:
        return (b & above) != 0
    return (a & above) == 0


def _enumerate_loop(gamma, nu0, nu, rn, beta, kappa, tol):
    m, n = nu.shape
    k = beta.shape[0]
    best_mask = 0
    best_val = -1.0
    num = np.empty(m)
    den = np.empty(m)
    use = np.empty(k)
    for mask in range(1 << n):
        for c in range(k):
            use[c] = 0.0
        for i in range(m):
            num[i] = 0.0
            den[i] = nu0[i]
        for j in range(n):
            if (mask >> j) & 1:
                for c in range(k):
                    use[c] += beta[c, j]
                for i in range(m):
                    num[i] += rn[i, j]
                    den[i] += nu[i, j]
        ok = True
        for c in range(k):
            if use[c] > kappa[c] + tol:
                ok = False
                break
        if not ok:
            continue
        val = 0.0
        for i in range(m):
            val += gamma[i] * num[i] / den[i]
        if val > best_val + TIE_TOL:
            best_val = val
            best_mask = mask
        elif val >= best_val - TIE_TOL:
            # inlined _lex_smaller(mask, best_mask)
            d = mask ^ best_mask
            low = d & -d
            above = ~((low << 1) - 1)
            if ((mask & low) != 0 and (best_mask & above) != 0) or ((best_mask & low) != 0 and (mask & above) == 0):
                best_val = max(val, best_val)
                best_mask = mask
    return best_mask, best_val


def _bnd_loop(row, beta, kappa, fix_j, fix_val, tol):
    n = row.shape[0]
    k = beta.shape[0]
    best = -1.0
    for mask in range(1 << n):
        if fix_j >= 0 and ((mask >> fix_j) & 1) != fix_val:
            continue
        ok = True
        for c in range(k):
            s = 0.0
            for j in range(n):
                if (mask >> j) & 1:
                    s += beta[c, j]
            if s > kappa[c] + tol:
                ok = False
                break
        if not ok:
            continue
        v = 0.0
        for j in range(n):
            if (mask >> j) & 1:
                v += row[j]
        if v > best:
            best = v
    return best


def _ratio_loop(alpha, d, at_upper, movable, direction, piv_tol, dual_tol, bland):
    n = alpha.shape[0]
    theta_max = np.inf
    for j in range(n):
        if not movable[j]:
            continue
        s = direction * alpha[j]
        if at_upper[j]:
            if s <= piv_tol:
                continue
            dd = max(-d[j], 0.0)
        else:
            if s >= -piv_tol:
                continue
            dd = max(d[j], 0.0)
        a = abs(alpha[j])
        if bland:
            r = dd / a
        else:
            r = (dd + dual_tol) / a
        if r < theta_max:
            theta_max = r
    if theta_max == np.inf:
        return -1
    q = -1
    best_a = 0.0
    for j in range(n):
        if not movable[j]:
            continue
        s = direction * alpha[j]
        if at_upper[j]:
            if s <= piv_tol:
                continue
            dd = max(-d[j], 0.0)
        else:
            if s >= -piv_tol:
                continue
            dd = max(d[j], 0.0)
        a = abs(alpha[j])
        r = dd / a
        if bland:
            if r <= theta_max + 1e-12:
                return j
        elif r <= theta_max and a > best_a:
            best_a = a
            q = j
    return q


def _greedy_loop(values, weights, cap):
    """Fractional knapsack by value/weight ratio; zero-weight items first, ties by index."""
    n = values.shape[0]
    total = 0.0
    for j in range(n):
        if weights[j] <= 0.0 and values[j] > 0.0:
            total += values[j]
    ratio = np.empty(n)
    for j in range(n):
        if weights[j] > 0.0:
            ratio[j] = values[j] / weights[j]
        else:
            ratio[j] = -1.0
    order = np.argsort(-ratio, kind="mergesort")
    left = cap
    for t in range(n):
        j = order[t]
        if weights[j] <= 0.0 or values[j] <= 0.0:
            continue
        if left <= 0.0:
            break
        if weights[j] <= left:
            total += values[j]
            left -= weights[j]
        else:
            total += values[j] * left / weights[j]
            left = 0.0
    return total


def _eta_ftran_loop(v, rows, cols, k):
    """Apply eta matrices ``E_k ... E_1`` to v in place (column form, dense etas)."""
    m = v.shape[0]
    for t in range(k):
        r = rows[t]
        vr = v[r] / cols[t, r]
        if vr != 0.0:
            for i in range(m):
                v[i] -= cols[t, i] * vr
        v[r] = vr
    return v


def _eta_btran_loop(v, rows, cols, k):
    """Apply ``E_1^T ... E_k^T`` to v in place."""
    m = v.shape[0]
    for t in range(k - 1, -1, -1):
        r = rows[t]
        s = 0.0
        for i in range(m):
            if i != r:
                s += cols[t, i] * v[i]
        v[r] = (v[r] - s) / cols[t, r]
    return v


def _inverse_update_loop(inv, col, r):
    """Pivot an explicit basis inverse in place: column ``col`` (= B^-1 a_q) enters at row r."""
    m = inv.shape[0]
    piv = col[r]
    for k in range(m):
        inv[r, k] /= piv
    for i in range(m):
        f = col[i]
        if i != r and f != 0.0:
            for k in range(m):
                inv[i, k] -= f * inv[r, k]
    return inv


# ---------------------------------------------------------------------------
# vectorized numpy versions


def _bit_matrix(start: int, stop: int, n: int) -> np.ndarray:
    masks = np.arange(start, stop, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(float)


def _enumerate_np(gamma, nu0, nu, rn, beta, kappa, tol, chunk=1 << 15):
    n = nu.shape[1]
    best_mask, best_val = 0, -1.0
    for start in range(0, 1 << n, chunk):
        stop = min(start + chunk, 1 << n)
        X = _bit_matrix(start, stop, n)
        ok = np.all(X @ beta.T <= kappa + tol, axis=1) if beta.shape[0] else np.ones(len(X), bool)
        if not ok.any():
            continue
        vals = ((X @ rn.T) / (nu0 + X @ nu.T)) @ gamma
        vals[~ok] = -np.inf
        top = vals.max()
        if top < best_val - TIE_TOL:
            continue
        # resolve near-ties in enumeration order, as the loop version does
        for t in np.flatnonzero(vals >= max(top, best_val) - TIE_TOL):
            v, mask = float(vals[t]), start + int(t)
            if v > best_val + TIE_TOL:
                best_val, best_mask = v, mask
            elif v >= best_val - TIE_TOL and _lex_smaller(mask, best_mask):
                best_val, best_mask = max(v, best_val), mask
    return best_mask, best_val


def _bnd_np(row, beta, kappa, fix_j, fix_val, tol, chunk=1 << 15):
    n = row.shape[0]
    best = -1.0
    for start in range(0, 1 << n, chunk):
        X = _bit_matrix(start, min(start + chunk, 1 << n), n)
        ok = np.all(X @ beta.T <= kappa + tol, axis=1) if beta.shape[0] else np.ones(len(X), bool)
        if fix_j >= 0:
            ok &= X[:, fix_j] == fix_val
        if ok.any():
            best = max(best, float((X[ok] @ row).max()))
    return best


def _ratio_np(alpha, d, at_upper, movable, direction, piv_tol, dual_tol, bland):
    s = direction * alpha
    elig = movable & np.where(at_upper, s > piv_tol, s < -piv_tol)
    idx = np.flatnonzero(elig)
    if idx.size == 0:
        return -1
    a = np.abs(alpha[idx])
    dd = np.where(at_upper[idx], np.maximum(-d[idx], 0.0), np.maximum(d[idx], 0.0))
    r = dd / a
    if bland:
        theta = r.min()
        return int(idx[np.flatnonzero(r <= theta + 1e-12)[0]])
    theta_max = ((dd + dual_tol) / a).min()
    cand = np.flatnonzero(r <= theta_max)
    return int(idx[cand[np.argmax(a[cand])]])


def _greedy_np(values, weights, cap):
    values = np.asarray(values, float)
    weights = np.asarray(weights, float)
    free = (weights <= 0) & (values > 0)
    total = values[free].sum()
    pos = np.flatnonzero((weights > 0) & (values > 0))
    if pos.size == 0 or cap <= 0:
        return float(total)
    ratio = values[pos] / weights[pos]
    order = pos[np.argsort(-ratio, kind="mergesort")]
    cum = np.cumsum(weights[order])
    full = np.searchsorted(cum, cap, side="right")
    total += values[order[:full]].sum()
    if full < order.size:
        used = cum[full - 1] if full else 0.0
        j = order[full]
        total += values[j] * (cap - used) / weights[j]
    return float(total)


def _eta_ftran_np(v, rows, cols, k):
    for t in range(k):
        r = rows[t]
        vr = v[r] / cols[t, r]
        if vr != 0.0:
            v -= cols[t] * vr
        v[r] = vr
    return v


def _eta_btran_np(v, rows, cols, k):
    for t in range(k - 1, -1, -1):
        r = rows[t]
        col = cols[t]
        v[r] = (v[r] - (col @ v - col[r] * v[r])) / col[r]
    return v


def _inverse_update_np(inv, col, r):
    row = inv[r] / col[r]
    inv -= np.outer(col, row)
    inv[r] = row
    return inv


NUMPY_KERNELS = {
    "enumerate": _enumerate_np,
    "bnd": _bnd_np,
    "ratio": _ratio_np,
    "greedy": _greedy_np,
    "ftran": _eta_ftran_np,
    "btran": _eta_btran_np,
    "inverse_update": _inverse_update_np,
}

NUMBA_KERNELS: dict = {}
if _nb is not None:
    NUMBA_KERNELS = {
        "enumerate": _nb.njit(cache=True)(_enumerate_loop),
        "bnd": _nb.njit(cache=True)(_bnd_loop),
        "ratio": _nb.njit(cache=True)(_ratio_loop),
        "greedy": _nb.njit(cache=True)(_greedy_loop),
        "ftran": _nb.njit(cache=True)(_eta_ftran_loop),
        "btran": _nb.njit(cache=True)(_eta_btran_loop),
        "inverse_update": _nb.njit(cache=True)(_inverse_update_loop),
    }

USE_NUMBA = _want_numba()
KERNELS = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def backend() -> str:
    return "numba" if KERNELS is NUMBA_KERNELS and NUMBA_KERNELS else "numpy"


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily route every wrapper through ``numba`` or ``numpy`` kernels."""
    global KERNELS
    if name not in ("numba", "numpy"):
        raise ValueError("backend must be numba or numpy")
    if name == "numba" and not NUMBA_KERNELS:
        raise RuntimeError("numba is not available")
    old = KERNELS
    KERNELS = NUMBA_KERNELS if name == "numba" else NUMPY_KERNELS
    try:
        yield
    finally:
        KERNELS = old


def enumerate_best(gamma, nu0, nu, rn, beta, kappa, tol=1e-9):
    """Best feasible mask by plain counting over all ``2**n`` assortments."""
    n = nu.shape[1]
    if n > MAX_ENUM_PRODUCTS:
        raise ValueError(f"enumeration capped at {MAX_ENUM_PRODUCTS} products")
    mask, val = KERNELS["enumerate"](
        np.ascontiguousarray(gamma, float), np.ascontiguousarray(nu0, float),
        np.ascontiguousarray(nu, float), np.ascontiguousarray(rn, float),
        np.ascontiguousarray(beta, float).reshape(-1, n), np.ascontiguousarray(kappa, float), tol)
    return int(mask), float(val)


def enumerate_bnd(row, beta, kappa, fix_j=-1, fix_val=0, tol=1e-9):
    n = row.shape[0]
    if n > MAX_ENUM_PRODUCTS:
        raise ValueError(f"enumeration capped at {MAX_ENUM_PRODUCTS} products")
    return float(KERNELS["bnd"](np.ascontiguousarray(row, float),
                                np.ascontiguousarray(beta, float).reshape(-1, n),
                                np.ascontiguousarray(kappa, float), int(fix_j), int(fix_val), tol))


def dual_ratio_test(alpha, d, at_upper, movable, direction, piv_tol=1e-9, dual_tol=1e-9, bland=False):
    return int(KERNELS["ratio"](alpha, d, at_upper, movable, float(direction), piv_tol, dual_tol, bland))


def greedy_fractional(values, weights, cap) -> float:
    return float(KERNELS["greedy"](np.ascontiguousarray(values, float),
                                   np.ascontiguousarray(weights, float), float(cap)))


def eta_ftran(v, rows, cols, k):
    return KERNELS["ftran"](v, rows, cols, k)


def eta_btran(v, rows, cols, k):
    return KERNELS["btran"](v, rows, cols, k)


def inverse_update(inv, col, r):
    return KERNELS["inverse_update"](inv, col, int(r))
