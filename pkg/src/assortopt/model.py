"""Abstract mixed 0-1 models for the four formulations.

Variables carry role tags so the solver can find ``x`` (assortment
indicators), ``y`` (inverse attraction per class), ``z`` (products
``y_i x_j``) and ``w`` (attraction per class, conic forms only).  Cone rows
are stored in hyperbolic form ``a * b >= q**2`` with ``q`` a variable or the
constant 1.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bounds import BoundsTable, build_bounds_table
from .instance import Instance, as_indicator

LE, GE, EQ = "<=", ">=", "="


class FormulationKind(str, enum.Enum):
    MILP = "milp"
    MILP_MC = "milp-mc"
    CONIC = "conic"
    CONIC_MC = "conic-mc"

    @property
    def conic(self) -> bool:
        return self in (FormulationKind.CONIC, FormulationKind.CONIC_MC)

    @property
    def mccormick(self) -> bool:
        return self in (FormulationKind.MILP_MC, FormulationKind.CONIC_MC)

    @property
    def label(self) -> str:
        return {"milp": "MILP", "milp-mc": "MILP+MC", "conic": "CONIC", "conic-mc": "CONIC+MC"}[self.value]


@dataclass
class LinearRow:
    """``sum coefs[name] * var  sense  rhs`` keyed by variable name."""

    coefs: dict[str, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class AbstractModel:
    kind: FormulationKind | None
    names: list[str] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    role: list[str] = field(default_factory=list)
    row_cols: list[np.ndarray] = field(default_factory=list)
    row_vals: list[np.ndarray] = field(default_factory=list)
    row_sense: list[str] = field(default_factory=list)
    row_rhs: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    cone_a: list[int] = field(default_factory=list)
    cone_b: list[int] = field(default_factory=list)
    cone_q: list[int] = field(default_factory=list)  # -1 means the constant 1
    objective: np.ndarray | None = None
    sense: str = "min"
    revenue_shift: float = 0.0
    x_idx: np.ndarray | None = None
    y_idx: np.ndarray | None = None
    z_idx: np.ndarray | None = None
    w_idx: np.ndarray | None = None
    instance: Instance | None = field(default=None, repr=False)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    # construction ---------------------------------------------------------
    def add_var(self, name: str, lb: float, ub: float, binary: bool = False, role: str = "") -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        k = len(self.names)
        self._index[name] = k
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(binary)
        self.role.append(role)
        return k

    def add_row(self, cols, vals, sense: str, rhs: float, name: str = "") -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        self.row_cols.append(np.asarray(cols, dtype=np.int64))
        self.row_vals.append(np.asarray(vals, dtype=float))
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs))
        self.row_names.append(name or f"r{len(self.row_rhs) - 1}")
        return len(self.row_rhs) - 1

    def add_linear_row(self, row: LinearRow) -> int:
        cols = [self._index[k] for k in row.coefs]
        return self.add_row(cols, list(row.coefs.values()), row.sense, row.rhs, row.name)

    def add_cone(self, a: int, b: int, q: int = -1) -> None:
        if self.lb[a] < 0 or self.lb[b] < 0:
            raise ValueError("cone sides must be nonnegative variables")
        self.cone_a.append(a)
        self.cone_b.append(b)
        self.cone_q.append(q)

    def index(self, name: str) -> int:
        return self._index[name]

    # views ------------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.row_rhs)

    @property
    def n_cones(self) -> int:
        return len(self.cone_a)

    def matrix(self) -> sp.csr_matrix:
        if not self.row_cols:
            return sp.csr_matrix((0, self.n_vars))
        indptr = np.concatenate(([0], np.cumsum([c.size for c in self.row_cols])))
        return sp.csr_matrix((np.concatenate(self.row_vals), np.concatenate(self.row_cols), indptr),
                             shape=(self.n_rows, self.n_vars))

    def min_scale_objective(self) -> tuple[np.ndarray, float]:
        """``(c, const)`` with ``const + c @ v`` equal to the shifted minimization value.

        On that scale every formulation reports ``revenue_shift - revenue``.
        """
        if self.sense == "max":
            return -self.objective, self.revenue_shift
        return self.objective.copy(), 0.0

    def revenue_of(self, v: np.ndarray) -> float:
        c, const = self.min_scale_objective()
        return self.revenue_shift - (const + float(c @ v))

    def cone_arrays(self):
        return (np.asarray(self.cone_a, dtype=np.int64), np.asarray(self.cone_b, dtype=np.int64),
                np.asarray(self.cone_q, dtype=np.int64))

    def row_violation(self, v: np.ndarray) -> float:
        if self.n_rows == 0:
            return 0.0
        act = self.matrix() @ v
        rhs = np.asarray(self.row_rhs)
        sense = np.asarray(self.row_sense)
        viol = np.where(sense == LE, act - rhs, np.where(sense == GE, rhs - act, np.abs(act - rhs)))
        return float(max(viol.max(), 0.0))

    def cone_violation(self, v: np.ndarray) -> np.ndarray:
        """Per-row violation ``q**2 - a*b`` (positive means violated)."""
        a, b, q = self.cone_arrays()
        qv = np.where(q >= 0, v[np.maximum(q, 0)], 1.0)
        return qv * qv - v[a] * v[b]

    def complete(self, inst: Instance, s) -> np.ndarray:
        """Variable vector for an explicit assortment: y, z, w at their defining values."""
        x = as_indicator(inst, s)
        v = np.zeros(self.n_vars)
        w = inst.nu0 + inst.nu @ x
        y = 1.0 / w
        v[self.x_idx] = x
        v[self.y_idx] = y
        v[self.z_idx] = y[:, None] * x[None, :]
        if self.w_idx is not None:
            v[self.w_idx] = w
        return v


# builders -------------------------------------------------------------------

def _add_core_vars(model: AbstractModel, inst: Instance, y_lb: np.ndarray, with_w: bool) -> None:
    m, n = inst.nu.shape
    hi = 1.0 / inst.nu0
    model.x_idx = np.array([model.add_var(f"x_{j}", 0.0, 1.0, True, "x") for j in range(n)], dtype=np.int64)
    model.y_idx = np.array([model.add_var(f"y_{i}", y_lb[i], hi[i], False, "y") for i in range(m)], dtype=np.int64)
    model.z_idx = np.array([[model.add_var(f"z_{i}_{j}", 0.0, hi[i], False, "z") for j in range(n)]
                            for i in range(m)], dtype=np.int64).reshape(m, n)
    if with_w:
        wmax = inst.nu0 + inst.nu.sum(axis=1)
        model.w_idx = np.array([model.add_var(f"w_{i}", inst.nu0[i], wmax[i], False, "w") for i in range(m)],
                               dtype=np.int64)


def _add_capacity(model: AbstractModel, inst: Instance) -> None:
    for k, c in enumerate(inst.constraints):
        nz = np.flatnonzero(c.beta)
        model.add_row(model.x_idx[nz], c.beta[nz], LE, c.kappa, f"cap_{k}")


def mccormick_rows(inst: Instance, bounds: BoundsTable) -> list[LinearRow]:
    """The four McCormick families for every ``z_ij = y_i x_j``.

    Conditional bounds that do not apply (``x_j = 1`` infeasible) fall back
    to the global lower bound.
    """
    hi1, lo1, lo0, hi = bounds.mc_coefficients()
    m, n = inst.nu.shape
    rows = []
    for i in range(m):
        y = f"y_{i}"
        for j in range(n):
            z, x = f"z_{i}_{j}", f"x_{j}"
            rows.append(LinearRow({z: 1.0, x: -hi1[i, j]}, LE, 0.0, f"mc1_{i}_{j}"))
            rows.append(LinearRow({z: 1.0, x: -lo1[i, j]}, GE, 0.0, f"mc4_{i}_{j}"))
            rows.append(LinearRow({z: 1.0, y: -1.0, x: -lo0[i, j]}, LE, -lo0[i, j], f"mc2_{i}_{j}"))
            rows.append(LinearRow({z: 1.0, y: -1.0, x: -hi[i]}, GE, -hi[i], f"mc3_{i}_{j}"))
    return rows


def _add_mccormick(model: AbstractModel, inst: Instance, bounds: BoundsTable) -> None:
    # same rows as mccormick_rows, added by index to avoid name lookups on big models
    hi1, lo1, lo0, hi = bounds.mc_coefficients()
    m, n = inst.nu.shape
    for i in range(m):
        yi = model.y_idx[i]
        for j in range(n):
            z, x = model.z_idx[i, j], model.x_idx[j]
            model.add_row((z, x), (1.0, -hi1[i, j]), LE, 0.0, f"mc1_{i}_{j}")
            model.add_row((z, x), (1.0, -lo1[i, j]), GE, 0.0, f"mc4_{i}_{j}")
            model.add_row((z, yi, x), (1.0, -1.0, -lo0[i, j]), LE, -lo0[i, j], f"mc2_{i}_{j}")
            model.add_row((z, yi, x), (1.0, -1.0, -hi[i]), GE, -hi[i], f"mc3_{i}_{j}")


def build_milp(inst: Instance, with_mc: bool = False, bounds: BoundsTable | None = None) -> AbstractModel:
    """Linearized model maximizing ``sum gamma_i rho_ij nu_ij z_ij``.

    Without McCormick rows the products use big-M rows with ``U = 1/nu_i0``;
    with them, the four McCormick families replace those three rows.
    """
    if with_mc and bounds is None:
        raise ValueError("McCormick rows need a BoundsTable")
    m, n = inst.nu.shape
    model = AbstractModel(FormulationKind.MILP_MC if with_mc else FormulationKind.MILP, instance=inst)
    y_lb = bounds.y_lo if with_mc else np.zeros(m)
    _add_core_vars(model, inst, y_lb, with_w=False)
    _add_capacity(model, inst)
    for i in range(m):
        model.add_row(np.concatenate(([model.y_idx[i]], model.z_idx[i])),
                      np.concatenate(([inst.nu0[i]], inst.nu[i])), EQ, 1.0, f"bal_{i}")
    if with_mc:
        _add_mccormick(model, inst, bounds)
    else:
        for i in range(m):
            u = inst.nu0[i]
            yi = model.y_idx[i]
            for j in range(n):
                z, x = model.z_idx[i, j], model.x_idx[j]
                model.add_row((yi, z, x), (u, -u, 1.0), LE, 1.0, f"bm1_{i}_{j}")
                model.add_row((z, yi), (1.0, -1.0), LE, 0.0, f"bm2_{i}_{j}")
                model.add_row((z, x), (u, -1.0), LE, 0.0, f"bm3_{i}_{j}")
    c = np.zeros(model.n_vars)
    c[model.z_idx] = inst.gamma[:, None] * inst.rho * inst.nu
    model.objective = c
    model.sense = "max"
    model.revenue_shift = inst.revenue_shift
    return model


def build_conic(inst: Instance, with_mc: bool = False, bounds: BoundsTable | None = None) -> AbstractModel:
    """Conic model minimizing ``sum gamma_i (nu_i0 rbar_i y_i + sum_j nu_ij (rbar_i - rho_ij) z_ij)``.

    Reported revenue is ``revenue_shift`` minus the objective.
    """
    if with_mc and bounds is None:
        raise ValueError("McCormick rows need a BoundsTable")
    m, n = inst.nu.shape
    model = AbstractModel(FormulationKind.CONIC_MC if with_mc else FormulationKind.CONIC, instance=inst)
    y_lb = bounds.y_lo if with_mc else np.zeros(m)
    _add_core_vars(model, inst, y_lb, with_w=True)
    _add_capacity(model, inst)
    for i in range(m):
        model.add_row(np.concatenate(([model.w_idx[i]], model.x_idx)),
                      np.concatenate(([1.0], -inst.nu[i])), EQ, inst.nu0[i], f"wdef_{i}")
    for i in range(m):
        model.add_row(np.concatenate(([model.y_idx[i]], model.z_idx[i])),
                      np.concatenate(([inst.nu0[i]], inst.nu[i])), GE, 1.0, f"facet_{i}")
    if with_mc:
        _add_mccormick(model, inst, bounds)
    for i in range(m):
        for j in range(n):
            model.add_cone(int(model.z_idx[i, j]), int(model.w_idx[i]), int(model.x_idx[j]))
    for i in range(m):
        model.add_cone(int(model.y_idx[i]), int(model.w_idx[i]), -1)
    rbar = inst.rho_bar
    c = np.zeros(model.n_vars)
    c[model.y_idx] = inst.gamma * inst.nu0 * rbar
    c[model.z_idx] = inst.gamma[:, None] * inst.nu * (rbar[:, None] - inst.rho)
    model.objective = c
    model.sense = "min"
    model.revenue_shift = inst.revenue_shift
    return model


def build(inst: Instance, kind, bounds: BoundsTable | None = None) -> AbstractModel:
    kind = FormulationKind(kind)
    if kind.mccormick and bounds is None:
        bounds = build_bounds_table(inst)
    if kind.conic:
        return build_conic(inst, kind.mccormick, bounds)
    return build_milp(inst, kind.mccormick, bounds)


@dataclass
class EquivalenceReport:
    seed: int | None
    revenue: dict = field(default_factory=dict)
    assortment: dict = field(default_factory=dict)
    zroot: dict = field(default_factory=dict)
    tol: float = 1e-6

    @property
    def ordered(self) -> bool:
        z = self.zroot
        return (z["milp"] <= z["milp-mc"] + self.tol) and (z["milp-mc"] <= z["conic-mc"] + self.tol)


def validate_formulation_equivalence(inst: Instance, tol: float = 1e-6, config=None) -> EquivalenceReport:
    """Solve all four formulations and check they agree, and that root bounds are ordered.

    In minimization form the converged root relaxations must satisfy
    ``zroot(milp) <= zroot(milp-mc) <= zroot(conic-mc)``; plain CONIC is not
    compared with the others. Raises AssertionError naming the seed on failure.
    """
    from .bb import SolveConfig, solve
    from .instance import expected_revenue

    cfg = config or SolveConfig()
    root_cfg = SolveConfig(**{**cfg.__dict__, "root_only": True, "node_log": None})
    bounds = build_bounds_table(inst)
    rep = EquivalenceReport(inst.seed, tol=tol)
    for kind in FormulationKind:
        model = build(inst, kind, bounds)
        full = solve(model, cfg)
        rep.revenue[kind.value] = full.revenue
        rep.assortment[kind.value] = tuple(full.assortment)
        rep.zroot[kind.value] = solve(model, root_cfg).zroot
    best = max(rep.revenue.values())
    for kind, value in rep.revenue.items():
        if abs(value - best) > tol or abs(expected_revenue(inst, rep.assortment[kind]) - best) > tol:
            raise AssertionError(f"seed {inst.seed}: {kind} returns {value!r}, best is {best!r}")
    if not rep.ordered:
        raise AssertionError(f"seed {inst.seed}: root bounds out of order {rep.zroot}")
    return rep


# export -----------------------------------------------------------------------

def cone_rows_l2(model: AbstractModel):
    """Each cone row as ``||(2q, a - b)||_2 <= a + b``.

    Yields ``(G, h, g, e)`` with ``G`` a 2 x n matrix, so the row reads
    ``||G v + h|| <= g @ v + e``.
    """
    n = model.n_vars
    out = []
    for a, b, q in zip(model.cone_a, model.cone_b, model.cone_q):
        G = np.zeros((2, n))
        h = np.zeros(2)
        if q >= 0:
            G[0, q] = 2.0
        else:
            h[0] = 2.0
        G[1, a] += 1.0
        G[1, b] -= 1.0
        g = np.zeros(n)
        g[a] += 1.0
        g[b] += 1.0
        out.append((G, h, g, 0.0))
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def _terms(cols, vals, names) -> str:
    parts = []
    for c, v in zip(cols, vals):
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} {names[c]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(model: AbstractModel, out=None, linearize_only: bool = False, cuts=None,
             cone_form: str = "rotated") -> str:
    """Write the model in CPLEX LP format and return the text.

    Cone rows become quadratic constraints: ``rotated`` writes
    ``[ q^2 - a * b ] <= 0`` (the constant case as ``[ - a * b ] <= -1``);
    ``l2`` adds helper columns ``t1 = 2q, t2 = a - b, t3 = a + b`` and writes
    ``[ t1^2 + t2^2 - t3^2 ] <= 0``.  With ``linearize_only`` the cone rows
    are dropped and ``cuts`` (linear rows ``(cols, vals, sense, rhs)``) are
    written in their place.
    """
    names = list(model.names)
    buf = io.StringIO()
    kind = model.kind.label if model.kind else "custom"
    buf.write(f"\\ assortment model {kind}\n")
    if model.revenue_shift:
        buf.write(f"\\ revenue shift {_fmt(model.revenue_shift)}\n")
    buf.write("Maximize\n" if model.sense == "max" else "Minimize\n")
    nz = np.flatnonzero(model.objective)
    buf.write(f" obj: {_terms(nz, model.objective[nz], names)}\n")
    buf.write("Subject To\n")
    for cols, vals, sense, rhs, name in zip(model.row_cols, model.row_vals, model.row_sense,
                                            model.row_rhs, model.row_names):
        buf.write(f" {name}: {_terms(cols, vals, names)} {sense} {_fmt(rhs)}\n")
    extra_bounds = []
    if linearize_only:
        for k, (cols, vals, sense, rhs) in enumerate(cuts or []):
            buf.write(f" oa_{k}: {_terms(cols, vals, names)} {sense} {_fmt(rhs)}\n")
    elif cone_form == "rotated":
        for k, (a, b, q) in enumerate(zip(model.cone_a, model.cone_b, model.cone_q)):
            if q >= 0:
                buf.write(f" qc_{k}: [ {names[q]} ^2 - {names[a]} * {names[b]} ] <= 0\n")
            else:
                buf.write(f" qc_{k}: [ - {names[a]} * {names[b]} ] <= -1\n")
    elif cone_form == "l2":
        for k, (a, b, q) in enumerate(zip(model.cone_a, model.cone_b, model.cone_q)):
            t1, t2, t3 = f"t1_{k}", f"t2_{k}", f"t3_{k}"
            if q >= 0:
                buf.write(f" soc1_{k}: {t1} - 2 {names[q]} = 0\n")
            else:
                buf.write(f" soc1_{k}: {t1} = 2\n")
            buf.write(f" soc2_{k}: {t2} - {names[a]} + {names[b]} = 0\n")
            buf.write(f" soc3_{k}: {t3} - {names[a]} - {names[b]} = 0\n")
            buf.write(f" qc_{k}: [ {t1} ^2 + {t2} ^2 - {t3} ^2 ] <= 0\n")
            extra_bounds += [f" -inf <= {t1} <= +inf", f" -inf <= {t2} <= +inf", f" {t3} >= 0"]
    else:
        raise ValueError(f"unknown cone form {cone_form!r}")
    buf.write("Bounds\n")
    for name, lo, hi, b in zip(names, model.lb, model.ub, model.binary):
        if not b:
            buf.write(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}\n")
    for line in extra_bounds:
        buf.write(line + "\n")
    buf.write("Binaries\n")
    for name, b in zip(names, model.binary):
        if b:
            buf.write(f" {name}\n")
    buf.write("End\n")
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w") as fh:
                fh.write(text)
    return text
