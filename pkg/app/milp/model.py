"""
MILP Model.

In-memory mixed-integer linear program: bounded variables with an
integrality flag, sparse linear rows, and a linear objective that is always
minimized. Rows are stored verbatim; nothing is presolved at insertion.
"""
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, NewType, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import InvalidHandleError, ModelBuildError

VarId = NewType("VarId", int)
ConstraintId = NewType("ConstraintId", int)

MPS_NAME_LIMIT = 64
_MPS_SANITIZE = re.compile(r"[^A-Za-z0-9_]")


def sanitize_name(name: str) -> str:
    """Name as written to MPS: [A-Za-z0-9_] only, at most 64 characters."""
    return _MPS_SANITIZE.sub("_", name)[:MPS_NAME_LIMIT]


class Integrality(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "L"
    GE = "G"
    EQ = "E"


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE_WITH_GAP = "feasible-with-gap"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT_REACHED = "limit-reached"
    NUMERICAL_FAILURE = "numerical-failure"

    @property
    def has_solution(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_WITH_GAP)


@dataclass
class Assignment:
    """Solver result: values indexed by VarId, objective and status."""
    values: np.ndarray
    objective: float
    status: SolveStatus
    iterations: int = 0

    def __getitem__(self, var: int) -> float:
        return float(self.values[var])

    def value(self, var: int) -> float:
        return float(self.values[var])

    @classmethod
    def without_solution(cls, status: SolveStatus, n_vars: int, iterations: int = 0) -> "Assignment":
        return cls(np.full(n_vars, np.nan), math.nan, status, iterations)


@dataclass(frozen=True)
class DenseForm:
    """Dense arrays of a model, rows in insertion order."""
    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray  # array of "L"/"G"/"E"
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    is_integer: np.ndarray
    priority: np.ndarray


@dataclass(frozen=True)
class Violation:
    kind: str  # row | bound | integrality
    index: int
    amount: float


class MilpModel:
    """
    A minimization MILP with sparse rows.

    Handles (VarId / ConstraintId) are dense integers in insertion order and
    are only valid for the model that issued them.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: List[str] = []
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.integrality: List[Integrality] = []
        self.priority: List[int] = []
        self.row_names: List[str] = []
        self.row_indices: List[Tuple[int, ...]] = []
        self.row_coeffs: List[Tuple[float, ...]] = []
        self.senses: List[Sense] = []
        self.rhs: List[float] = []
        self.objective: Dict[int, float] = {}
        self._mps_names: set = set()
        self._frozen = False
        self._dense: Optional[DenseForm] = None

    # =========================================================================
    # CONSTRUCTION
    # =========================================================================

    def add_variable(
        self,
        name: str,
        lb: float,
        ub: float,
        integrality: Integrality = Integrality.CONTINUOUS,
        priority: int = 0,
    ) -> VarId:
        """
        Add a variable and return its handle.

        Args:
            name: Nonempty, unique after MPS sanitization
            lb: Lower bound (may be -inf)
            ub: Upper bound (may be +inf)
            integrality: Binary or continuous
            priority: Branching priority (higher branches first)

        Raises:
            ModelBuildError: Inverted bounds, binary bounds outside [0, 1], bad name
        """
        self._check_open()
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub):
            raise ModelBuildError(f"variable '{name}' has NaN bounds")
        if lb > ub:
            raise ModelBuildError(f"variable '{name}' has inverted bounds [{lb}, {ub}]")
        if integrality == Integrality.BINARY and (lb < 0.0 or ub > 1.0):
            raise ModelBuildError(f"binary variable '{name}' bounds [{lb}, {ub}] exceed [0, 1]")
        if not name:
            raise ModelBuildError("variable name must be nonempty")
        mps_name = sanitize_name(name)
        if mps_name in self._mps_names:
            raise ModelBuildError(f"variable name '{name}' collides after sanitization")
        self._mps_names.add(mps_name)
        self.var_names.append(name)
        self.lower.append(lb)
        self.upper.append(ub)
        self.integrality.append(Integrality(integrality))
        self.priority.append(int(priority))
        return VarId(len(self.var_names) - 1)

    def add_constraint(
        self,
        coeffs: Iterable[Tuple[int, float]],
        sense: Sense,
        rhs: float,
        name: str = "",
    ) -> ConstraintId:
        """
        Add sum(coef * var) <sense> rhs. Repeated handles are merged by summing.

        Raises:
            InvalidHandleError: Handle not issued by this model
            ModelBuildError: Non-finite coefficient or rhs
        """
        self._check_open()
        merged: Dict[int, float] = {}
        for var, coef in coeffs:
            self._check_handle(var)
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelBuildError(f"non-finite coefficient {coef} in row '{name}'")
            merged[int(var)] = merged.get(int(var), 0.0) + coef
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelBuildError(f"non-finite rhs {rhs} in row '{name}'")
        self.row_names.append(name)
        self.row_indices.append(tuple(merged.keys()))
        self.row_coeffs.append(tuple(merged.values()))
        self.senses.append(Sense(sense))
        self.rhs.append(rhs)
        return ConstraintId(len(self.rhs) - 1)

    def set_objective(self, coeffs: Iterable[Tuple[int, float]]) -> None:
        self._check_open()
        objective: Dict[int, float] = {}
        for var, coef in coeffs:
            self._check_handle(var)
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelBuildError(f"non-finite objective coefficient {coef}")
            objective[int(var)] = objective.get(int(var), 0.0) + coef
        self.objective = objective

    def freeze(self) -> "MilpModel":
        """Mark construction finished; the model becomes read-only."""
        self._frozen = True
        return self

    def _check_open(self) -> None:
        if self._frozen:
            raise ModelBuildError(f"model '{self.name}' is frozen")

    def _check_handle(self, var: int) -> None:
        if not isinstance(var, (int, np.integer)) or not 0 <= int(var) < len(self.var_names):
            raise InvalidHandleError(f"invalid variable handle {var!r}")

    # =========================================================================
    # QUERIES
    # =========================================================================

    @property
    def num_variables(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return len(self.rhs)

    @property
    def num_binaries(self) -> int:
        return sum(1 for kind in self.integrality if kind == Integrality.BINARY)

    def binary_ids(self) -> List[int]:
        return [j for j, kind in enumerate(self.integrality) if kind == Integrality.BINARY]

    def dense(self) -> DenseForm:
        """Dense arrays of the model (cached once the model is frozen)."""
        if self._dense is not None:
            return self._dense
        n, m = self.num_variables, self.num_constraints
        c = np.zeros(n)
        for var, coef in self.objective.items():
            c[var] = coef
        A = np.zeros((m, n))
        for i, (idx, vals) in enumerate(zip(self.row_indices, self.row_coeffs)):
            if idx:
                A[i, list(idx)] = vals
        form = DenseForm(
            c=c,
            A=A,
            senses=np.array([s.value for s in self.senses], dtype="<U1"),
            rhs=np.array(self.rhs, dtype=float),
            lower=np.array(self.lower, dtype=float),
            upper=np.array(self.upper, dtype=float),
            is_integer=np.array([k == Integrality.BINARY for k in self.integrality], dtype=bool),
            priority=np.array(self.priority, dtype=int),
        )
        if self._frozen:
            self._dense = form
        return form

    def objective_value(self, values: Sequence[float]) -> float:
        return float(sum(coef * values[var] for var, coef in self.objective.items()))

    def violations(
        self,
        values: Sequence[float],
        feasibility_tol: float = 1e-7,
        integrality_tol: float = 1e-6,
    ) -> List[Violation]:
        """
        Independently re-evaluate every bound, row and integrality condition.

        Row violations are normalized by max(1, max |a_ij|) of the row.
        """
        x = np.asarray(values, dtype=float)
        found: List[Violation] = []
        if x.shape != (self.num_variables,) or not np.all(np.isfinite(x)):
            return [Violation("bound", -1, math.inf)]
        for j in range(self.num_variables):
            below = self.lower[j] - x[j]
            above = x[j] - self.upper[j]
            scale = max(1.0, abs(self.lower[j]) if math.isfinite(self.lower[j]) else 1.0,
                        abs(self.upper[j]) if math.isfinite(self.upper[j]) else 1.0)
            amount = max(below, above)
            if amount > feasibility_tol * scale:
                found.append(Violation("bound", j, float(amount)))
            if self.integrality[j] == Integrality.BINARY:
                frac = abs(x[j] - round(x[j]))
                if frac > integrality_tol:
                    found.append(Violation("integrality", j, float(frac)))
        for i, (idx, vals) in enumerate(zip(self.row_indices, self.row_coeffs)):
            activity = float(np.dot(vals, x[list(idx)])) if idx else 0.0
            scale = max([1.0] + [abs(v) for v in vals])
            residual = activity - self.rhs[i]
            if self.senses[i] == Sense.LE:
                amount = residual
            elif self.senses[i] == Sense.GE:
                amount = -residual
            else:
                amount = abs(residual)
            if amount / scale > feasibility_tol:
                found.append(Violation("row", i, amount / scale))
        return found

    def is_feasible(
        self, values: Sequence[float], feasibility_tol: float = 1e-7, integrality_tol: float = 1e-6
    ) -> bool:
        return not self.violations(values, feasibility_tol, integrality_tol)

    def summary(self) -> Dict[str, int]:
        return {
            "variables": self.num_variables,
            "binaries": self.num_binaries,
            "constraints": self.num_constraints,
        }
