"""Global and conditional bounds on ``y_i = 1 / (nu_i0 + sum_j nu_ij x_j)``.

Every bound comes from an upper estimate ``f`` of the knapsack-type problem
``max sum_j nu_ij x_j`` over the capacity rows, ``y_lo = 1 / (nu_i0 + f)``.
Cardinality-type rows are solved exactly by taking the largest preferences;
general rows use the fractional (LP) greedy value; several rows combine by
taking the minimum of the individual relaxation values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import greedy_fractional
from .instance import CapacityConstraint, Instance


def _card(kappa: float) -> int:
    return int(math.floor(kappa + 1e-9))


def _topk(values: np.ndarray, k: int):
    """Largest-``k`` sum plus its value under each single fixing.

    Returns ``(total, under_x0, under_x1)`` where ``under_x0[j]`` is the best
    sum with item j excluded and ``under_x1[j]`` the best sum with item j
    forced in (NaN when ``k < 1``).
    """
    v = np.maximum(np.asarray(values, float), 0.0)
    n = v.size
    if n == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    order = np.argsort(-v, kind="mergesort")
    srt = v[order]
    csum = np.concatenate(([0.0], np.cumsum(srt)))
    k = max(k, 0)
    kk = min(k, n)
    total = csum[kk]
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    inside = rank < kk
    nxt = srt[kk] if kk < n else 0.0
    under_x0 = np.where(inside, total - v + nxt, total)
    if k < 1:
        under_x1 = np.full(n, np.nan)
    else:
        km1 = min(k - 1, n)
        under_x1 = np.where(inside, total, v + csum[km1])
    return float(total), under_x0, under_x1


def closed_form_cardinality(inst: Instance, i: int, kappa: float, fixing: tuple[int, int] | None = None):
    """Exact BND value for one cardinality row ``sum_j x_j <= kappa``.

    ``fixing=(j, 0)`` drops product j; ``fixing=(j, 1)`` forces it in. Returns
    None when the fixing cannot be met (``x_j = 1`` with ``kappa < 1``).
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    total, f0, f1 = _topk(inst.nu[i], _card(kappa))
    if fixing is None:
        return total
    j, xi = fixing
    val = f1[j] if xi else f0[j]
    return None if np.isnan(val) else float(val)


def _disjoint(groups) -> bool:
    seen: set[int] = set()
    for g in groups:
        if seen.intersection(g):
            return False
        seen.update(g)
    return True


def subset_cardinality_values(row: np.ndarray, constraints, exact: bool = True):
    """Exact BND values for pairwise disjoint cardinality-type rows.

    Products outside every member set are unconstrained. Returns
    ``(total, under_x0, under_x1)`` like :func:`_topk`.
    """
    groups = [c.members if c.kind == "subset-cardinality" else tuple(range(row.size)) for c in constraints]
    if not _disjoint(groups):
        if exact:
            raise ValueError("member sets overlap; the separable exact value does not apply")
    row = np.maximum(np.asarray(row, float), 0.0)
    n = row.size
    free = np.ones(n, bool)
    for g in groups:
        free[list(g)] = False
    free_sum = float(row[free].sum())
    total = free_sum
    under_x0 = np.where(free, -row, 0.0)
    under_x1 = np.zeros(n)
    parts = []
    for c, g in zip(constraints, groups):
        idx = np.asarray(g, dtype=np.int64)
        t, f0, f1 = _topk(row[idx], _card(c.kappa))
        total += t
        parts.append((idx, t, f0, f1))
    under_x0 += total
    under_x1 += total
    for idx, t, f0, f1 in parts:
        under_x0[idx] = total - t + f0
        under_x1[idx] = total - t + f1
    return total, under_x0, under_x1


def greedy_knapsack_values(row: np.ndarray, c: CapacityConstraint):
    """Fractional greedy value of one general row, unconditioned and under each fixing."""
    row = np.maximum(np.asarray(row, float), 0.0)
    beta, cap = c.beta, float(c.kappa)
    total = greedy_fractional(row, beta, cap)
    n = row.size
    under_x0 = np.empty(n)
    under_x1 = np.empty(n)
    for j in range(n):
        vj = row[j]
        if vj <= 0.0:
            under_x0[j] = total
        else:
            tmp = row.copy()
            tmp[j] = 0.0
            under_x0[j] = greedy_fractional(tmp, beta, cap)
        if beta[j] > cap + 1e-9:
            under_x1[j] = np.nan
        else:
            tmp = row.copy()
            tmp[j] = 0.0
            under_x1[j] = vj + greedy_fractional(tmp, beta, max(cap - beta[j], 0.0))
    return total, under_x0, under_x1


def _class_values(inst: Instance, i: int):
    """Upper estimates of BND for class i: ``(f, f|x_j=0, f|x_j=1)``; NaN marks an infeasible fixing."""
    row = np.asarray(inst.nu[i])
    n = inst.n_products
    cons = inst.constraints
    if not cons:
        total = float(row.sum())
        return total, total - row, np.full(n, total)
    card = [c for c in cons if c.is_cardinality_type]
    general = [c for c in cons if not c.is_cardinality_type]
    candidates = [greedy_knapsack_values(row, c) for c in general]
    if card:
        groups = [c.members if c.kind == "subset-cardinality" else tuple(range(n)) for c in card]
        if _disjoint(groups):
            candidates.append(subset_cardinality_values(row, card))
        else:
            candidates.extend(subset_cardinality_values(row, [c]) for c in card)
    total = min(t for t, _, _ in candidates)
    f0 = np.min(np.vstack([u for _, u, _ in candidates]), axis=0)
    f1s = np.vstack([u for _, _, u in candidates])
    # any relaxation that rules the fixing out proves it infeasible
    f1 = np.where(np.isnan(f1s).any(axis=0), np.nan, np.nanmin(np.where(np.isnan(f1s), np.inf, f1s), axis=0))
    return total, f0, f1


def bnd_relaxation_value(inst: Instance, i: int, fixing: tuple[int, int] | None = None):
    """Upper bound on the BND optimum for class i, optionally under ``x_j = xi``.

    None signals that the fixing is infeasible for the capacity rows.
    """
    if fixing is not None and not (0 <= fixing[0] < inst.n_products):
        raise IndexError("fixing names an unknown product")
    total, f0, f1 = _class_values(inst, i)
    if fixing is None:
        return total
    j, xi = fixing
    val = f1[j] if xi else f0[j]
    return None if np.isnan(val) else float(val)


@dataclass(frozen=True)
class BoundsTable:
    """Bounds on y, class-major. ``x1_ok[i, j]`` is False when ``x_j = 1`` is infeasible."""

    y_lo: np.ndarray
    y_hi: np.ndarray
    y_lo_x0: np.ndarray
    y_lo_x1: np.ndarray
    y_hi_x1: np.ndarray
    x1_ok: np.ndarray

    def mc_coefficients(self):
        """Bounds used by the McCormick rows, with global fallbacks where a fixing is inapplicable."""
        lo1 = np.where(self.x1_ok, self.y_lo_x1, self.y_lo[:, None])
        return self.y_hi_x1, lo1, self.y_lo_x0, self.y_hi

    @classmethod
    def trivial(cls, inst: Instance, eps: float = 0.0) -> "BoundsTable":
        """Bounds that make the McCormick rows collapse to the big-M rows."""
        m, n = inst.nu.shape
        hi = 1.0 / inst.nu0
        return cls(np.full(m, eps), hi, np.full((m, n), eps), np.full((m, n), eps),
                   np.repeat(hi[:, None], n, axis=1), np.ones((m, n), bool))

    def to_tsv(self) -> str:
        m, n = self.y_lo_x0.shape
        lines = ["class\tproduct\ty_lo\ty_hi\ty_lo|x=0\ty_lo|x=1\ty_hi|x=1"]
        for i in range(m):
            for j in range(n):
                lo1 = f"{self.y_lo_x1[i, j]:.12g}" if self.x1_ok[i, j] else "NA"
                lines.append(f"{i}\t{j}\t{self.y_lo[i]:.12g}\t{self.y_hi[i]:.12g}\t"
                             f"{self.y_lo_x0[i, j]:.12g}\t{lo1}\t{self.y_hi_x1[i, j]:.12g}")
        return "\n".join(lines) + "\n"


def build_bounds_table(inst: Instance) -> BoundsTable:
    m, n = inst.nu.shape
    nu0 = inst.nu0
    y_lo = np.empty(m)
    lo0 = np.empty((m, n))
    lo1 = np.empty((m, n))
    ok = np.ones((m, n), bool)
    for i in range(m):
        f, f0, f1 = _class_values(inst, i)
        y_lo[i] = 1.0 / (nu0[i] + f)
        lo0[i] = 1.0 / (nu0[i] + f0)
        ok[i] = ~np.isnan(f1)
        lo1[i] = np.where(ok[i], 1.0 / (nu0[i] + np.nan_to_num(f1)), np.nan)
    y_hi = 1.0 / nu0
    hi1 = 1.0 / (nu0[:, None] + inst.nu)
    return BoundsTable(y_lo, y_hi, lo0, lo1, hi1, ok)
