"""
MILP Package.

Model container, solver result type and free-format MPS export.
"""
from app.milp.model import (
    Assignment,
    ConstraintId,
    DenseForm,
    Integrality,
    MilpModel,
    Sense,
    SolveStatus,
    VarId,
    sanitize_name,
)
from app.milp.mps import write_mps

__all__ = [
    "Assignment",
    "ConstraintId",
    "DenseForm",
    "Integrality",
    "MilpModel",
    "Sense",
    "SolveStatus",
    "VarId",
    "sanitize_name",
    "write_mps",
]
