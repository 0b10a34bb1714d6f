"""
Solver Configuration and Statistics.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class BranchingRule(str, Enum):
    STRUCTURAL_PRIORITY = "structural-priority"
    MOST_FRACTIONAL = "most-fractional"


class NodeSelection(str, Enum):
    BEST_BOUND = "best-bound"
    DEPTH_FIRST_DIVE = "depth-first-dive"


class SolverConfig(BaseModel):
    """Tolerances, limits and search strategy for the embedded solver."""
    abs_gap: float = Field(default=1e-6, gt=0, description="Absolute optimality gap")
    rel_gap: float = Field(default=1e-4, gt=0, description="Relative optimality gap")
    feasibility_tol: float = Field(default=1e-7, gt=0)
    integrality_tol: float = Field(default=1e-6, gt=0)
    node_limit: Optional[int] = Field(default=None, gt=0, description="Unset means no limit")
    time_limit_s: Optional[float] = Field(default=None, gt=0, description="Unset means no limit")
    branching: BranchingRule = BranchingRule.STRUCTURAL_PRIORITY
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    seed: int = 0
    verbose: bool = False
    log_every: int = Field(default=100, ge=1, description="Progress line every N nodes")
    refactor_every: int = Field(default=50, ge=1, description="Pivots between LU refactorizations")
    max_lp_iterations: int = Field(default=50_000, ge=1)

    class Config:
        use_enum_values = False
        json_schema_extra = {
            "example": {
                "rel_gap": 1e-4,
                "node_limit": 20000,
                "time_limit_s": 60,
                "branching": "structural-priority",
                "node_selection": "best-bound",
            }
        }


@dataclass
class BnbStats:
    nodes: int = 0
    lp_iterations: int = 0
    incumbent: float = float("inf")
    best_bound: float = float("-inf")
    wall_time_s: float = 0.0
    gap: float = float("inf")
    open_nodes: int = 0
    numerical_failures: int = 0
    limit_reached: bool = False
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "lp_iterations": self.lp_iterations,
            "incumbent": self.incumbent,
            "best_bound": self.best_bound,
            "wall_time_s": self.wall_time_s,
            "gap": self.gap,
            "open_nodes": self.open_nodes,
            "numerical_failures": self.numerical_failures,
            "limit_reached": self.limit_reached,
            "seed": self.seed,
        }
