"""MMNL assortment instances, exact revenue evaluation and the JSON schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

KINDS = ("general", "cardinality", "subset-cardinality")


@dataclass(frozen=True)
class CapacityConstraint:
    """One resource row ``sum_j beta[j] x_j <= kappa``."""

    kind: str
    beta: np.ndarray
    kappa: float
    members: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        beta = np.asarray(self.beta, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if np.any(beta < 0) or self.kappa < 0:
            raise ValueError("capacity data must be nonnegative")
        if self.kind == "cardinality" and not np.all(beta == 1.0):
            raise ValueError("cardinality constraint needs beta == 1")
        if self.kind == "subset-cardinality":
            if not np.all((beta == 0.0) | (beta == 1.0)):
                raise ValueError("subset-cardinality constraint needs 0/1 beta")
            support = tuple(int(j) for j in np.flatnonzero(beta))
            if self.members is not None and tuple(sorted(self.members)) != support:
                raise ValueError("members do not match beta support")
            object.__setattr__(self, "members", support)

    @classmethod
    def cardinality(cls, n_products: int, kappa: float) -> "CapacityConstraint":
        return cls("cardinality", np.ones(n_products), kappa)

    @classmethod
    def subset(cls, n_products: int, members: Iterable[int], kappa: float) -> "CapacityConstraint":
        beta = np.zeros(n_products)
        beta[list(members)] = 1.0
        return cls("subset-cardinality", beta, kappa)

    @classmethod
    def general(cls, beta: Sequence[float], kappa: float) -> "CapacityConstraint":
        return cls("general", np.asarray(beta, dtype=float), kappa)

    @property
    def is_cardinality_type(self) -> bool:
        return self.kind in ("cardinality", "subset-cardinality")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "kappa": float(self.kappa)}
        if self.kind == "general":
            d["beta"] = [float(b) for b in self.beta]
        elif self.kind == "subset-cardinality":
            d["members"] = list(self.members)
        return d

    @classmethod
    def from_dict(cls, d: dict, n_products: int) -> "CapacityConstraint":
        kind = d["kind"]
        if kind == "cardinality":
            return cls.cardinality(n_products, d["kappa"])
        if kind == "subset-cardinality":
            return cls.subset(n_products, d["members"], d["kappa"])
        return cls.general(d["beta"], d["kappa"])


def _frozen(a, ndim) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """Problem data: ``nu[i, j]`` and ``rho[i, j]`` are class-by-product."""

    gamma: np.ndarray
    nu0: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    constraints: tuple[CapacityConstraint, ...] = ()
    seed: int | None = None
    family: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        gamma = _frozen(self.gamma, 1)
        nu0 = _frozen(self.nu0, 1)
        m = gamma.shape[0]
        nu = np.array(self.nu, dtype=float).reshape(m, -1) if m else np.zeros((0, 0))
        rho = np.array(self.rho, dtype=float).reshape(nu.shape)
        nu.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "nu0", nu0)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if nu0.shape != (m,):
            raise ValueError("nu0 must have one entry per class")
        if np.any(nu0 <= 0):
            raise ValueError("no-purchase preferences must be positive")
        if np.any(nu < 0) or np.any(gamma < 0):
            raise ValueError("preferences and class weights must be nonnegative")
        for c in self.constraints:
            if c.beta.shape != (self.n_products,):
                raise ValueError("constraint length does not match n_products")

    @property
    def n_products(self) -> int:
        return self.nu.shape[1]

    @property
    def n_classes(self) -> int:
        return self.gamma.shape[0]

    @property
    def rho_bar(self) -> np.ndarray:
        """Per-class maximum price; 0 for a class when there are no products."""
        if self.n_products == 0:
            return np.zeros(self.n_classes)
        return self.rho.max(axis=1)

    @property
    def revenue_shift(self) -> float:
        """``sum_i gamma_i * rho_bar_i``; revenue = shift - minimization objective."""
        return float(self.gamma @ self.rho_bar)

    def capacity_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.constraints:
            return np.zeros((0, self.n_products)), np.zeros(0)
        beta = np.vstack([c.beta for c in self.constraints])
        kappa = np.array([c.kappa for c in self.constraints], dtype=float)
        return beta, kappa

    def with_constraints(self, constraints) -> "Instance":
        return Instance(self.gamma, self.nu0, self.nu, self.rho, tuple(constraints),
                        self.seed, self.family, dict(self.meta))

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n_products": self.n_products,
            "n_classes": self.n_classes,
            "gamma": self.gamma.tolist(),
            "nu0": self.nu0.tolist(),
            "nu": self.nu.tolist(),
            "rho": self.rho.tolist(),
            "constraints": [c.to_dict() for c in self.constraints],
            "seed": self.seed,
            "family": self.family,
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        n, m = int(d["n_products"]), int(d["n_classes"])
        nu = np.array(d["nu"], dtype=float).reshape(m, n)
        rho = np.array(d["rho"], dtype=float).reshape(m, n)
        cons = tuple(CapacityConstraint.from_dict(c, n) for c in d.get("constraints", []))
        return cls(d["gamma"], d["nu0"], nu, rho, cons, d.get("seed"),
                   d.get("family", "custom"), d.get("meta", {}))

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_json(Path(path).read_text())


def as_indicator(inst: Instance, s) -> np.ndarray:
    """Convert an assortment to a float 0/1 vector.

    Float or bool arrays are read as indicator vectors; any other iterable
    (set, list, integer array) is read as product indices.
    """
    n = inst.n_products
    if isinstance(s, np.ndarray) and s.dtype.kind in "fb":
        if s.shape != (n,):
            raise ValueError("indicator vector has wrong length")
        x = np.asarray(s, dtype=float)
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("indicator vector must be 0/1")
        return x
    idx = np.fromiter((int(j) for j in s), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"assortment index out of range [0, {n})")
    x = np.zeros(n)
    x[idx] = 1.0
    return x


def expected_revenue(inst: Instance, s) -> float:
    x = as_indicator(inst, s)
    num = (inst.rho * inst.nu) @ x
    den = inst.nu0 + inst.nu @ x
    return float(inst.gamma @ (num / den))


def is_feasible(inst: Instance, s, tol: float = 1e-9) -> bool:
    x = as_indicator(inst, s)
    return all(float(c.beta @ x) <= c.kappa + tol for c in inst.constraints)


def minimization_objective(inst: Instance, s) -> float:
    """Value of the shifted objective, equal to ``revenue_shift - expected_revenue``."""
    x = as_indicator(inst, s)
    rbar = inst.rho_bar
    num = inst.nu0 * rbar + (inst.nu * (rbar[:, None] - inst.rho)) @ x
    den = inst.nu0 + inst.nu @ x
    return float(inst.gamma @ (num / den))


def y_values(inst: Instance, s) -> np.ndarray:
    """``y_i = 1 / (nu_i0 + sum_j nu_ij x_j)`` for an explicit assortment."""
    x = as_indicator(inst, s)
    return 1.0 / (inst.nu0 + inst.nu @ x)
