"""
Brute-Force Oracle.

Enumerates every assignment of the non-fixed binaries and solves the residual
LP for each. Exponential; only for tiny test instances.
"""
import itertools
import logging
from typing import Optional

import numpy as np

from app.core.exceptions import ModelBuildError
from app.milp.model import Assignment, MilpModel, SolveStatus
from app.solver.config import SolverConfig
from app.solver.simplex import LpEngine

logger = logging.getLogger(__name__)

MAX_BINARIES = 25
IMPROVEMENT_TOL = 1e-9


def _activity_range(A: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Row-wise min and max of A x over the box [lower, upper]."""
    with np.errstate(invalid="ignore"):
        low = np.where(A > 0, A * lower, np.where(A < 0, A * upper, 0.0))
        high = np.where(A > 0, A * upper, np.where(A < 0, A * lower, 0.0))
    return low.sum(axis=1), high.sum(axis=1)


def brute_force(model: MilpModel, config: Optional[SolverConfig] = None) -> Assignment:
    """
    Exact optimum by enumeration of the binaries.

    Assignments whose fixed binaries already make some row unsatisfiable over
    the continuous bounds are skipped before the LP is solved.

    Raises:
        ModelBuildError: More than 25 non-fixed binaries
    """
    config = config or SolverConfig()
    form = model.dense()
    binaries = [j for j in model.binary_ids() if form.lower[j] < form.upper[j]]
    if len(binaries) > MAX_BINARIES:
        raise ModelBuildError(
            f"brute force is limited to {MAX_BINARIES} binaries, model has {len(binaries)}"
        )
    engine = LpEngine(model, config)
    if not binaries:
        return engine.solve().assignment

    others = np.ones(model.num_variables, dtype=bool)
    others[binaries] = False
    A = form.A
    rest_low, rest_high = _activity_range(A[:, others], form.lower[others], form.upper[others])
    A_bin = A[:, binaries]
    row_scale = np.maximum(1.0, np.abs(A).max(axis=1)) if A.size else np.ones(len(form.rhs))
    slack = config.feasibility_tol * row_scale
    le = form.senses != "G"  # L and E rows need low <= rhs
    ge = form.senses != "L"  # G and E rows need high >= rhs

    best: Optional[Assignment] = None
    basis = None
    iterations = 0
    screened = 0
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        fixed = np.array(bits)
        contribution = A_bin @ fixed
        low = rest_low + contribution
        high = rest_high + contribution
        if np.any(le & (low > form.rhs + slack)) or np.any(ge & (high < form.rhs - slack)):
            screened += 1
            continue
        lower = form.lower.copy()
        upper = form.upper.copy()
        lower[binaries] = fixed
        upper[binaries] = fixed
        result = engine.solve(lower, upper, basis)
        iterations += result.assignment.iterations
        status = result.assignment.status
        if status == SolveStatus.UNBOUNDED:
            return Assignment.without_solution(SolveStatus.UNBOUNDED, model.num_variables, iterations)
        if status != SolveStatus.OPTIMAL:
            continue
        basis = result.basis
        if best is None or result.assignment.objective < best.objective - IMPROVEMENT_TOL:
            best = result.assignment

    logger.debug(
        f"Brute force over {len(binaries)} binaries: {screened} assignments screened out, "
        f"{iterations} LP iterations"
    )
    if best is None:
        return Assignment.without_solution(SolveStatus.INFEASIBLE, model.num_variables, iterations)
    return Assignment(best.values, best.objective, SolveStatus.OPTIMAL, iterations)
