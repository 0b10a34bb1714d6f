"""
Pydantic Schemas for the HTTP API.

Request and response models for fitting, prediction and MPS export.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.learning.formulation import HyperParams
from app.schemas.tree import TreeDocument
from app.solver.config import SolverConfig


class FitRequest(BaseModel):
    """Training rows plus the learning setup."""
    rows: List[Dict[str, float]] = Field(..., description="One mapping of name -> value per sample")
    target: str = Field(default="y", description="Name of the target column in each row")
    basis_branch: List[str] = Field(..., min_length=1, description="Split basis expressions")
    basis_leaf: List[str] = Field(..., min_length=1, description="Leaf basis expressions")
    hyperparams: HyperParams = Field(default_factory=HyperParams)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    warm_start: bool = True

    class Config:
        json_schema_extra = {
            "example": {
                "rows": [{"x": -1.0, "y": 0.0}, {"x": -0.5, "y": 0.0}, {"x": 0.5, "y": 1.0}, {"x": 1.0, "y": 1.0}],
                "basis_branch": ["x"],
                "basis_leaf": ["1", "x"],
                "hyperparams": {"depth": 1},
                "solver": {"node_limit": 10000},
            }
        }


class ObjectiveBreakdown(BaseModel):
    l_acc: float = Field(..., description="Training mean absolute error")
    l_c: float = Field(..., description="Number of branching nodes")
    l_m: float = Field(..., description="L1 norm of the leaf coefficients")


class FitResponse(BaseModel):
    status: str
    tree: Optional[TreeDocument] = None
    equation: Optional[str] = None
    objective: Optional[float] = None
    terms: Optional[ObjectiveBreakdown] = None
    stats: Dict[str, Any] = Field(default_factory=dict)
    model_size: Dict[str, int] = Field(default_factory=dict)
    invariants: Dict[str, bool] = Field(default_factory=dict)


class PredictRequest(BaseModel):
    tree: TreeDocument
    rows: List[Dict[str, float]]


class PredictResponse(BaseModel):
    predictions: List[float]
    leaves: List[int]
