"""Seeded instance families.

Streams: ``SeedSequence([seed, rep])`` is spawned into one child per matrix in
the fixed order of ``STREAMS``; each child drives its own ``PCG64``
generator. Adding a matrix to a family never perturbs the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instance import CapacityConstraint, Instance

STREAMS = ("price", "pref", "gamma", "graph", "beta", "partition", "misc")

FAMILIES = ("uniform200", "uniform500", "hard-graph", "general-capacity", "custom")

# parameter grids used in the experiments
FULL_GRIDS = {
    "uniform200": {"n_products": 200, "n_classes": 20, "nu0": (5.0, 10.0), "kappa": (10, 20, 50, 100, 200)},
    "uniform500": {"n_products": 500, "n_classes": 50, "nu0": (10.0, 20.0), "kappa": (20, 50, 100, 200, 500)},
    "hard-graph": {"n_products": 100, "n_classes": 100, "nu0": (1.0, 2.0), "kappa": (10, 20, 50, 100)},
    "general-capacity": {"n_products": 200, "n_classes": 20, "nu0": (10.0, 20.0),
                         "kappa": ((5, 2), (10, 4), (25, 10), (50, 20), (100, 40))},
}
GENERAL_CAPACITY_PAIRS = FULL_GRIDS["general-capacity"]["kappa"]


@dataclass
class GeneratorConfig:
    family: str
    n_products: int
    n_classes: int
    nu0_value: float
    kappa: float | tuple[float, float]
    seed: int = 0
    rep: int = 0
    neighbors: int = 10
    n_groups: int = 5
    symmetric: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n_products < 0 or self.n_classes < 1:
            raise ValueError("invalid dimensions")
        if self.nu0_value <= 0:
            raise ValueError("nu0 must be positive")
        if self.family == "hard-graph" and self.n_products != self.n_classes:
            raise ValueError("hard-graph needs n_products == n_classes")

    @classmethod
    def full(cls, family: str, nu0: float, kappa, seed: int = 0, rep: int = 0) -> "GeneratorConfig":
        g = FULL_GRIDS[family]
        return cls(family, g["n_products"], g["n_classes"], nu0, kappa, seed, rep)


def streams(seed: int, rep: int = 0) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence([int(seed) & (2**64 - 1), int(rep)]).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


def _meta(cfg: GeneratorConfig) -> dict:
    kappa = list(cfg.kappa) if isinstance(cfg.kappa, (tuple, list)) else cfg.kappa
    return {"nu0": cfg.nu0_value, "kappa": kappa, "rep": cfg.rep}


def gen_uniform(cfg: GeneratorConfig) -> Instance:
    """Shared prices U[1,3], preferences U[0,1], equal class weights, one cardinality row."""
    if cfg.family not in ("uniform200", "uniform500", "custom"):
        raise ValueError("gen_uniform handles the uniform families")
    n, m = cfg.n_products, cfg.n_classes
    rs = streams(cfg.seed, cfg.rep)
    price = rs["price"].uniform(1.0, 3.0, size=n)
    nu = rs["pref"].uniform(0.0, 1.0, size=(m, n))
    rho = np.broadcast_to(price, (m, n)).copy()
    gamma = np.full(m, 1.0 / m)
    nu0 = np.full(m, float(cfg.nu0_value))
    cons = (CapacityConstraint.cardinality(n, float(cfg.kappa)),)
    return Instance(gamma, nu0, nu, rho, cons, cfg.seed, cfg.family, _meta(cfg))


def gen_hard_graph(cfg: GeneratorConfig) -> Instance:
    """Each class considers itself (preference 1) plus ``neighbors`` random other products.

    With ``symmetric=True`` the consideration relation is made symmetric
    (i in C_j iff j in C_i), so set sizes vary around ``neighbors + 1``.
    """
    n, k = cfg.n_products, cfg.neighbors
    if k >= n:
        raise ValueError("neighbor count must be below n_products")
    rs = streams(cfg.seed, cfg.rep)
    adj = np.zeros((n, n), bool)
    g = rs["graph"]
    for i in range(n):
        others = np.delete(np.arange(n), i)
        adj[i, g.choice(others, size=k, replace=False)] = True
    if cfg.symmetric:
        adj |= adj.T
    nu = np.where(adj, rs["pref"].uniform(0.0, 1.0, size=(n, n)), 0.0)
    np.fill_diagonal(nu, 1.0)
    price = rs["price"].uniform(1.0, 3.0, size=n)
    rho = np.broadcast_to(price, (n, n)).copy()
    gamma = rs["gamma"].uniform(0.0, 1.0, size=n)
    nu0 = np.full(n, float(cfg.nu0_value))
    cons = (CapacityConstraint.cardinality(n, float(cfg.kappa)),)
    return Instance(gamma, nu0, nu, rho, cons, cfg.seed, cfg.family, _meta(cfg))


def gen_general_capacity(cfg: GeneratorConfig) -> Instance:
    """One general knapsack row (beta ~ U[0,1]) plus disjoint subset-cardinality rows.

    ``cfg.kappa`` is the pair (kappa_0, kappa_k). Member sets split a random
    permutation of the products into ``n_groups`` equal blocks.
    """
    n, m = cfg.n_products, cfg.n_classes
    try:
        k0, kk = cfg.kappa
    except TypeError:
        raise ValueError("general-capacity needs a (kappa_0, kappa_k) pair") from None
    if cfg.family == "general-capacity" and n == 200 and (k0, kk) not in GENERAL_CAPACITY_PAIRS:
        raise ValueError(f"({k0}, {kk}) is not on the experiment grid {GENERAL_CAPACITY_PAIRS}")
    if k0 < 0 or kk < 0 or cfg.n_groups < 1 or n % cfg.n_groups:
        raise ValueError("invalid grid pair or group count")
    rs = streams(cfg.seed, cfg.rep)
    price = rs["price"].uniform(1.0, 3.0, size=n)
    nu = rs["pref"].uniform(0.0, 1.0, size=(m, n))
    rho = np.broadcast_to(price, (m, n)).copy()
    beta0 = rs["beta"].uniform(0.0, 1.0, size=n)
    perm = rs["partition"].permutation(n)
    size = n // cfg.n_groups
    cons = [CapacityConstraint.general(beta0, float(k0))]
    for g in range(cfg.n_groups):
        cons.append(CapacityConstraint.subset(n, sorted(perm[g * size:(g + 1) * size].tolist()), float(kk)))
    gamma = np.full(m, 1.0 / m)
    nu0 = np.full(m, float(cfg.nu0_value))
    return Instance(gamma, nu0, nu, rho, tuple(cons), cfg.seed, cfg.family, _meta(cfg))


TINY_MAX_PRODUCTS = 12
TINY_MAX_CLASSES = 4
TINY_NU0 = (0.5, 1.0, 2.0, 5.0)


def gen_tiny(n_products: int, n_classes: int, seed: int, class_prices: bool = False) -> Instance:
    """Uniform-family instance at enumeration scale with a random cardinality budget.

    ``nu0`` is drawn from ``TINY_NU0`` so both tight and loose no-purchase
    regimes appear; ``class_prices`` draws a separate price row per class.
    """
    if not (0 <= n_products <= TINY_MAX_PRODUCTS and 1 <= n_classes <= TINY_MAX_CLASSES):
        raise ValueError(f"tiny instances need <= {TINY_MAX_PRODUCTS} products and 1..{TINY_MAX_CLASSES} classes")
    n, m = n_products, n_classes
    rs = streams(seed)
    if class_prices:
        rho = rs["price"].uniform(1.0, 3.0, size=(m, n))
    else:
        rho = np.broadcast_to(rs["price"].uniform(1.0, 3.0, size=n), (m, n)).copy()
    nu = rs["pref"].uniform(0.0, 1.0, size=(m, n))
    nu0 = np.full(m, float(rs["misc"].choice(TINY_NU0)))
    kappa = float(rs["misc"].integers(1, n + 1)) if n else 0.0
    gamma = np.full(m, 1.0 / m)
    cons = (CapacityConstraint.cardinality(n, kappa),)
    return Instance(gamma, nu0, nu, rho, cons, seed, "tiny", {"kappa": kappa})


def gen_tiny_general(n_products: int, n_classes: int, seed: int, n_groups: int = 2) -> Instance:
    """General-capacity structure at enumeration scale (one knapsack row plus disjoint subsets)."""
    if not (n_groups <= n_products <= TINY_MAX_PRODUCTS and 1 <= n_classes <= TINY_MAX_CLASSES):
        raise ValueError("size caps violated")
    rs = streams(seed)
    n, m = n_products, n_classes
    k0 = float(rs["misc"].uniform(0.3, 0.6) * n / 2)
    size = n // n_groups
    kk = float(rs["misc"].integers(1, size + 1))
    cfg = GeneratorConfig("custom", n - n % n_groups, m, float(rs["misc"].choice(TINY_NU0)), (k0, kk),
                          seed=seed, n_groups=n_groups)
    inst = gen_general_capacity(cfg)
    return Instance(inst.gamma, inst.nu0, inst.nu, inst.rho, inst.constraints, seed, "tiny-general", inst.meta)


def generate(cfg: GeneratorConfig) -> Instance:
    if cfg.family in ("uniform200", "uniform500"):
        return gen_uniform(cfg)
    if cfg.family == "hard-graph":
        return gen_hard_graph(cfg)
    if cfg.family == "general-capacity":
        return gen_general_capacity(cfg)
    if isinstance(cfg.kappa, (tuple, list)):
        return gen_general_capacity(cfg)
    return gen_uniform(cfg)
