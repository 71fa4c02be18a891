"""Approximation algorithms and exact oracles for facility location with
outliers, cardinality limits, lower bounds and capacities.
"""

from .instance import Facility, Infeasible, Instance, IntegralSolution, Problem, check_solution, generate_euclidean
from .lbflo import solve_lbflo
from .lbubfl import solve_lbubfl
from .oracle import exact_solve
from .rounding import solve_flo, solve_kflo

__all__ = [
    "Facility",
    "Infeasible",
    "Instance",
    "IntegralSolution",
    "Problem",
    "check_solution",
    "exact_solve",
    "generate_euclidean",
    "solve_flo",
    "solve_kflo",
    "solve_lbflo",
    "solve_lbubfl",
]
