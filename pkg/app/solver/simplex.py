"""
Bounded-Variable Revised Simplex.

Primal simplex on the standard form  A x - s = 0,  l <= (x, s) <= u,  where the
slack s_i carries the bounds implied by the row sense and rhs. Rows are scaled
by their largest |coefficient| before solving; column values are unaffected.

Phase 1 is composite: while some basic variable violates a bound the pricing
cost is -1 (below) / +1 (above) on those variables and zero elsewhere.

The basis is factorized as a dense LU of its structural kernel (slack columns
are unit vectors and drop out), updated with a product-form eta file, and
refactorized every ``SolverConfig.refactor_every`` pivots.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from app.milp.model import Assignment, MilpModel, SolveStatus
from app.solver.config import SolverConfig

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
OPTIMALITY_TOL = 1e-9
SINGULAR_TOL = 1e-11
DEGENERATE_STEP = 1e-12
STALL_LIMIT = 30
MAX_RECOVERIES = 2


class _SingularBasis(Exception):
    pass


@dataclass(frozen=True)
class LpBasis:
    """Basic column per row plus which nonbasic columns sit at their upper bound."""
    basic: np.ndarray  # int, length m, indices into the n + m extended columns
    at_upper: np.ndarray  # bool, length n + m


@dataclass
class LpResult:
    assignment: Assignment
    basis: Optional[LpBasis]


class _Factor:
    """
    Factorization of B = [A_S | -I_R].

    Rows covered by basic slacks (R) are eliminated explicitly; the remaining
    square kernel A[Q, S] is LU-factorized.
    """

    def __init__(self, A: np.ndarray, basic: np.ndarray, n: int):
        m = A.shape[0]
        slack = basic >= n
        self.m = m
        self.S_pos = np.flatnonzero(~slack)
        self.R_pos = np.flatnonzero(slack)
        self.R_rows = basic[slack] - n
        covered = np.zeros(m, dtype=bool)
        covered[self.R_rows] = True
        if int(covered.sum()) != len(self.R_rows):
            raise _SingularBasis("slack column repeated in basis")
        self.Q = np.flatnonzero(~covered)
        S_cols = basic[~slack]
        if len(self.Q) != len(S_cols):
            raise _SingularBasis("basis is not square")
        self.A_RS = A[np.ix_(self.R_rows, S_cols)]
        self.lu = None
        if len(S_cols):
            kernel = A[np.ix_(self.Q, S_cols)]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LinAlgWarning)
                lu, piv = lu_factor(kernel, check_finite=False)
            diag = np.abs(np.diag(lu))
            if not np.all(np.isfinite(diag)) or diag.min() <= SINGULAR_TOL * max(1.0, diag.max()):
                raise _SingularBasis("basis kernel is singular")
            self.lu = (lu, piv)
        self.etas: List[Tuple[int, np.ndarray]] = []

    def push(self, r: int, alpha: np.ndarray) -> None:
        eta = -alpha / alpha[r]
        eta[r] = 1.0 / alpha[r]
        self.etas.append((r, eta))

    def ftran(self, a: np.ndarray) -> np.ndarray:
        """Solve B x = a; x is indexed by basis position."""
        x = np.empty(self.m)
        if self.lu is not None:
            xs = lu_solve(self.lu, a[self.Q], check_finite=False)
            x[self.S_pos] = xs
            x[self.R_pos] = self.A_RS @ xs - a[self.R_rows]
        else:
            x[self.R_pos] = -a[self.R_rows]
        for r, eta in self.etas:
            xr = x[r]
            if xr != 0.0:
                x += eta * xr
                x[r] = eta[r] * xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        """Solve B^T y = c; c is indexed by basis position, y by row."""
        v = np.array(c, dtype=float)
        for r, eta in reversed(self.etas):
            v[r] = eta @ v
        y = np.empty(self.m)
        cR = v[self.R_pos]
        y[self.R_rows] = -cR
        if self.lu is not None:
            rhs = v[self.S_pos] + self.A_RS.T @ cR
            y[self.Q] = lu_solve(self.lu, rhs, trans=1, check_finite=False)
        return y


class LpEngine:
    """
    LP relaxation solver bound to one model.

    The scaled matrix is prepared once; ``solve`` may then be called many times
    with different variable bounds and warm bases (branch-and-bound nodes).
    """

    def __init__(self, model: MilpModel, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig()
        form = model.dense()
        self.m, self.n = form.A.shape
        if self.n and self.m:
            scale = np.abs(form.A).max(axis=1)
            scale[scale == 0.0] = 1.0
        else:
            scale = np.ones(self.m)
        self.A = form.A / scale[:, None]
        rhs = form.rhs / scale
        self.slack_lower = np.where(form.senses == "L", -np.inf, rhs)
        self.slack_upper = np.where(form.senses == "G", np.inf, rhs)
        self.c = form.c
        self.lower = form.lower
        self.upper = form.upper
        # internal tolerance leaves headroom for the independent feasibility check
        self.tol = self.config.feasibility_tol * 0.1

    def solve(
        self,
        lower: Optional[np.ndarray] = None,
        upper: Optional[np.ndarray] = None,
        basis: Optional[LpBasis] = None,
    ) -> LpResult:
        lower = self.lower if lower is None else np.asarray(lower, dtype=float)
        upper = self.upper if upper is None else np.asarray(upper, dtype=float)
        if np.any(lower > upper):
            return LpResult(Assignment.without_solution(SolveStatus.INFEASIBLE, self.n), None)
        run = _SimplexRun(self, lower, upper, basis)
        result = run.run()
        if result.assignment.status == SolveStatus.NUMERICAL_FAILURE:
            logger.warning(
                f"LP numerical failure after {run.iterations} iterations "
                f"({self.m} rows, {self.n} columns)"
            )
        return result


class _SimplexRun:
    """State of one simplex solve."""

    def __init__(self, engine: LpEngine, lower: np.ndarray, upper: np.ndarray,
                 basis: Optional[LpBasis]):
        self.e = engine
        n, m = engine.n, engine.m
        self.lower = np.concatenate([lower, engine.slack_lower])
        self.upper = np.concatenate([upper, engine.slack_upper])
        self.fixed = self.lower == self.upper
        self.cost = np.concatenate([engine.c, np.zeros(m)])
        at_upper = np.zeros(n + m, dtype=bool)
        self.basic = np.arange(n, n + m)
        if basis is not None and self._usable(basis):
            self.basic = np.array(basis.basic, dtype=int)
            at_upper = np.array(basis.at_upper, dtype=bool)
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[self.basic] = True
        x = np.where(np.isfinite(self.lower), self.lower,
                     np.where(np.isfinite(self.upper), self.upper, 0.0))
        self.x = np.where(at_upper & np.isfinite(self.upper), self.upper, x)
        self.iterations = 0
        self.recoveries = 0
        self.degenerate = 0
        self.bland = False
        self.factor: Optional[_Factor] = None

    def _usable(self, basis: LpBasis) -> bool:
        n, m = self.e.n, self.e.m
        basic = np.asarray(basis.basic)
        return (
            basic.shape == (m,)
            and len(np.unique(basic)) == m
            and (m == 0 or (basic.min() >= 0 and basic.max() < n + m))
            and np.asarray(basis.at_upper).shape == (n + m,)
        )

    def column(self, j: int) -> np.ndarray:
        if j < self.e.n:
            return self.e.A[:, j]
        col = np.zeros(self.e.m)
        col[j - self.e.n] = -1.0
        return col

    def refactor(self) -> bool:
        n, m = self.e.n, self.e.m
        try:
            self.factor = _Factor(self.e.A, self.basic, n)
        except _SingularBasis as e:
            self.recoveries += 1
            if self.recoveries > MAX_RECOVERIES:
                return False
            logger.debug(f"Singular basis ({e}); restarting from the slack basis")
            self.basic = np.arange(n, n + m)
            self.is_basic[:] = False
            self.is_basic[self.basic] = True
            self.x[:n] = np.clip(self.x[:n], self.lower[:n], self.upper[:n])
            self.factor = _Factor(self.e.A, self.basic, n)
        self.recompute()
        return True

    def recompute(self) -> None:
        """x_B from the nonbasic values: B x_B = -(A x_N - s_N)."""
        n = self.e.n
        xn = self.x.copy()
        xn[self.basic] = 0.0
        v = self.e.A @ xn[:n] - xn[n:]
        self.x[self.basic] = self.factor.ftran(-v)

    def ratio_test(self, rate: np.ndarray) -> Tuple[Optional[int], float, float]:
        """
        Leaving basis position, step length and the bound it leaves at.

        Basic variables outside their bounds block at the bound they violate;
        ones moving further away from feasibility do not block.
        """
        if self.e.m == 0:
            return None, np.inf, np.nan
        xB = self.x[self.basic]
        lB = self.lower[self.basic]
        uB = self.upper[self.basic]
        tol = self.e.tol
        below = xB < lB - tol
        above = xB > uB + tol
        t_dec = np.where(above, uB, lB)
        t_inc = np.where(below, lB, uB)
        dec = (rate < -PIVOT_TOL) & ~below & np.isfinite(t_dec)
        inc = (rate > PIVOT_TOL) & ~above & np.isfinite(t_inc)
        if not dec.any() and not inc.any():
            return None, np.inf, np.nan
        ratios = np.full(self.e.m, np.inf)
        targets = np.full(self.e.m, np.nan)
        ratios[dec] = (xB[dec] - t_dec[dec]) / -rate[dec]
        targets[dec] = t_dec[dec]
        ratios[inc] = (t_inc[inc] - xB[inc]) / rate[inc]
        targets[inc] = t_inc[inc]
        ratios = np.maximum(ratios, 0.0)
        if self.bland:
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + DEGENERATE_STEP)
            p = int(ties[np.argmin(self.basic[ties])])
        else:
            # Harris: relax bounds by half the tolerance, then pick the largest pivot
            harris = 0.5 * tol
            relaxed = np.full(self.e.m, np.inf)
            relaxed[dec] = (xB[dec] - t_dec[dec] + harris) / -rate[dec]
            relaxed[inc] = (t_inc[inc] + harris - xB[inc]) / rate[inc]
            theta = np.maximum(relaxed, 0.0).min()
            ties = np.flatnonzero(ratios <= theta)
            p = int(ties[np.argmax(np.abs(rate[ties]))])
        return p, float(ratios[p]), float(targets[p])

    def run(self) -> LpResult:
        e = self.e
        config = e.config
        if not self.refactor():
            return self._finish(SolveStatus.NUMERICAL_FAILURE)
        while True:
            if self.iterations >= config.max_lp_iterations:
                return self._finish(SolveStatus.LIMIT_REACHED)
            xB = self.x[self.basic]
            lB = self.lower[self.basic]
            uB = self.upper[self.basic]
            below = xB < lB - e.tol
            above = xB > uB + e.tol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cB = above.astype(float) - below.astype(float)
                y = self.factor.btran(cB)
                d = np.concatenate([-(e.A.T @ y), y])
            else:
                y = self.factor.btran(self.cost[self.basic])
                d = np.concatenate([e.c - e.A.T @ y, y])
            d[self.is_basic] = 0.0
            free = ~self.is_basic & ~self.fixed
            inc = free & (self.x < self.upper) & (d < -OPTIMALITY_TOL)
            dec = free & (self.x > self.lower) & (d > OPTIMALITY_TOL)
            candidates = inc | dec
            if not candidates.any():
                if self.factor.etas:
                    # confirm on a fresh factorization
                    if not self.refactor():
                        return self._finish(SolveStatus.NUMERICAL_FAILURE)
                    continue
                return self._finish(SolveStatus.INFEASIBLE if phase1 else SolveStatus.OPTIMAL)

            if self.bland:
                q = int(np.flatnonzero(candidates)[0])
            else:
                q = int(np.argmax(np.where(candidates, np.abs(d), -1.0)))
            direction = 1.0 if inc[q] else -1.0
            alpha = self.factor.ftran(self.column(q))
            rate = -direction * alpha
            p, step, target = self.ratio_test(rate)
            flip = self.upper[q] - self.lower[q]
            self.iterations += 1
            if flip <= step:
                p, step = None, flip
            if not np.isfinite(step):
                if phase1:
                    return self._finish(SolveStatus.NUMERICAL_FAILURE)
                return self._finish(SolveStatus.UNBOUNDED)

            self.x[q] += direction * step
            self.x[self.basic] += step * rate
            if p is None:
                self.x[q] = self.upper[q] if direction > 0 else self.lower[q]
            else:
                leaving = self.basic[p]
                self.x[leaving] = target
                self.basic[p] = q
                self.is_basic[leaving] = False
                self.is_basic[q] = True
                self.factor.push(p, alpha)
                if len(self.factor.etas) >= config.refactor_every and not self.refactor():
                    return self._finish(SolveStatus.NUMERICAL_FAILURE)

            if step <= DEGENERATE_STEP:
                self.degenerate += 1
                if self.degenerate > STALL_LIMIT and not self.bland:
                    logger.debug(f"Stalled for {self.degenerate} pivots; switching to Bland's rule")
                    self.bland = True
            else:
                self.degenerate = 0
                self.bland = False

    def _finish(self, status: SolveStatus) -> LpResult:
        n = self.e.n
        if status != SolveStatus.OPTIMAL:
            return LpResult(Assignment.without_solution(status, n, self.iterations), None)
        values = np.clip(self.x[:n], self.lower[:n], self.upper[:n])
        objective = float(self.e.c @ values) if n else 0.0
        at_upper = ~self.is_basic & np.isfinite(self.upper) & (self.x >= self.upper)
        basis = LpBasis(basic=self.basic.copy(), at_upper=at_upper)
        return LpResult(Assignment(values, objective, status, self.iterations), basis)


def solve_lp(
    model: MilpModel,
    config: Optional[SolverConfig] = None,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    basis: Optional[LpBasis] = None,
) -> Assignment:
    """
    Solve the LP relaxation of a model (integrality ignored).

    Args:
        model: The model
        config: Tolerances and iteration limits
        lower: Optional override of the variable lower bounds
        upper: Optional override of the variable upper bounds
        basis: Optional warm basis from a previous solve of the same model

    Returns:
        Assignment with status optimal, infeasible, unbounded, limit-reached
        or numerical-failure
    """
    return LpEngine(model, config).solve(lower, upper, basis).assignment
