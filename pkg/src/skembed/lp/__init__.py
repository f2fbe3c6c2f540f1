from .entropic import solve_entropic
from .exact import StandardForm, primal_residual, solve_exact, verify_farkas
from .program import INFEASIBLE, MAX_ITER, OPTIMAL, UNBOUNDED, LinearProgram, LpSolution

__all__ = [
    "LinearProgram", "LpSolution", "StandardForm", "solve_exact", "solve_entropic",
    "verify_farkas", "primal_residual", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITER",
]
