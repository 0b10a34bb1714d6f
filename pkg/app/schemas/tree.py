"""
Pydantic Schemas for Tree Documents.

A fitted tree is stored as a JSON document: basis functions as expression
text (re-parsed on load) and one entry per node position.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class NodeDocument(BaseModel):
    """One node position of the tree."""
    id: int = Field(..., ge=1, description="Heap position; children of n are 2n and 2n+1")
    kind: Literal["branch", "leaf", "inactive"]
    a: Optional[List[float]] = Field(default=None, description="Split coefficients over basis_branch")
    b: Optional[float] = Field(default=None, description="Split threshold")
    c: Optional[List[float]] = Field(default=None, description="Leaf coefficients over basis_leaf")

    class Config:
        extra = "forbid"
        allow_inf_nan = False


class TreeDocument(BaseModel):
    """Serialized symbolic decision tree."""
    depth: int = Field(..., ge=1)
    variables: List[str] = Field(..., description="Input variable names")
    basis_branch: List[str] = Field(..., min_length=1)
    basis_leaf: List[str] = Field(..., min_length=1)
    nodes: List[NodeDocument]

    class Config:
        extra = "forbid"
        json_schema_extra = {
            "example": {
                "depth": 1,
                "variables": ["x1", "x2"],
                "basis_branch": ["x1^2", "x2^2"],
                "basis_leaf": ["x1^2", "x2^2", "x2"],
                "nodes": [
                    {"id": 1, "kind": "branch", "a": [1.01, 1.0], "b": 2.54},
                    {"id": 2, "kind": "leaf", "c": [1.0, 1.0, 0.0]},
                    {"id": 3, "kind": "leaf", "c": [1.0, 0.0, 1.0]},
                ],
            }
        }
