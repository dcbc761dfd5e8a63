"""Capacitated assortment optimization under the mixed multinomial logit model."""
from .bb import SolveConfig, SolveReport, solve
from .bounds import BoundsTable, build_bounds_table
from .generators import GeneratorConfig, generate, gen_tiny
from .instance import CapacityConstraint, Instance, expected_revenue, is_feasible
from .model import FormulationKind, build, validate_formulation_equivalence
from .oracle import brute_force_bnd, brute_force_optimum

__all__ = [
    "BoundsTable", "CapacityConstraint", "FormulationKind", "GeneratorConfig", "Instance",
    "SolveConfig", "SolveReport", "brute_force_bnd", "brute_force_optimum", "build",
    "build_bounds_table", "expected_revenue", "gen_tiny", "generate", "is_feasible", "solve",
    "validate_formulation_equivalence",
]

__version__ = "0.1.0"
