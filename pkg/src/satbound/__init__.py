"""First-moment upper bounds on the satisfiability threshold of random 3-SAT."""

__version__ = "0.1.0"

from .distributions import DistributionSpec, ModelId, build_distribution
from .kernel import Multipliers, Restriction, batir_check
from .lp import beta1_bounds
from .schemes import Scheme, exclusion_audit
from .solver import alpha_sweep, beta_sweep, boundary_report, solve_stationary, threshold_bound
from .verifier import Formula, enumerate_solutions, monte_carlo_first_moment, parse_dimacs

__all__ = [
    "DistributionSpec", "ModelId", "build_distribution", "Multipliers", "Restriction", "batir_check",
    "beta1_bounds", "Scheme", "exclusion_audit", "alpha_sweep", "beta_sweep", "boundary_report",
    "solve_stationary", "threshold_bound", "Formula", "enumerate_solutions", "monte_carlo_first_moment",
    "parse_dimacs",
]
