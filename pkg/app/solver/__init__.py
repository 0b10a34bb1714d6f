"""
Solver Package.

Bounded revised simplex, branch-and-bound and a brute-force oracle.
"""
from app.solver.config import BnbStats, BranchingRule, NodeSelection, SolverConfig
from app.solver.simplex import LpBasis, LpEngine, solve_lp
from app.solver.bnb import solve_milp
from app.solver.brute import brute_force

__all__ = [
    "BnbStats",
    "BranchingRule",
    "NodeSelection",
    "SolverConfig",
    "LpBasis",
    "LpEngine",
    "solve_lp",
    "solve_milp",
    "brute_force",
]
