"""Exhaustive ground-truth solvers for small instances."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .instance import Instance, expected_revenue

MAX_PRODUCTS = _kernels.MAX_ENUM_PRODUCTS


def mask_to_assortment(mask: int, n: int) -> frozenset[int]:
    return frozenset(j for j in range(n) if (mask >> j) & 1)


def brute_force_optimum(inst: Instance) -> tuple[frozenset[int], float]:
    """Enumerate every assortment and keep the best feasible one.

    Revenue ties (within 1e-12) go to the lexicographically smallest sorted
    index tuple, so the empty set wins when nothing earns revenue.
    """
    n = inst.n_products
    if n > MAX_PRODUCTS:
        raise ValueError(f"brute force is capped at {MAX_PRODUCTS} products (got {n})")
    if n == 0:
        return frozenset(), 0.0
    beta, kappa = inst.capacity_matrix()
    mask, _ = _kernels.enumerate_best(inst.gamma, inst.nu0, inst.nu, inst.rho * inst.nu, beta, kappa)
    best = mask_to_assortment(mask, n)
    return best, expected_revenue(inst, best)


def brute_force_bnd(inst: Instance, i: int, fixing: tuple[int, int] | None = None) -> float | None:
    """Exact maximum of ``sum_j nu[i, j] x_j`` over feasible binary x.

    Returns None when the fixing ``x_j = xi`` admits no feasible point.
    """
    n = inst.n_products
    if n > MAX_PRODUCTS:
        raise ValueError(f"brute force is capped at {MAX_PRODUCTS} products (got {n})")
    if n == 0:
        return 0.0
    beta, kappa = inst.capacity_matrix()
    fj, fv = (-1, 0) if fixing is None else (int(fixing[0]), int(fixing[1]))
    if not (-1 <= fj < n):
        raise IndexError("fixing names an unknown product")
    best = _kernels.enumerate_bnd(np.asarray(inst.nu[i]), beta, kappa, fj, fv)
    return None if best < 0 else best
