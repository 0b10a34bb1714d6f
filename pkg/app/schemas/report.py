"""
Experiment Reports.

One MetricsReport per experiment cell (method x size x seed x ...). Fields
that do not apply to a method or case stay None.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

SYMBOLIC_TREE = "symbolic-tree"


class MethodMetrics(BaseModel):
    method: str
    test_mae: Optional[float] = None
    train_mae: Optional[float] = None
    rollout_rmse: Optional[float] = None
    leaf_l2: Optional[float] = Field(default=None, description="L2 error of matched leaf coefficients")
    split_l2: Optional[float] = Field(default=None, description="L2 error of the normalized root split")
    threshold: Optional[float] = Field(default=None, description="Normalized root split threshold")
    form_preserved: Optional[bool] = None
    coefficients: Dict[str, float] = Field(default_factory=dict)
    equation: Optional[str] = None
    status: Optional[str] = None
    nodes: Optional[int] = None
    wall_time_s: Optional[float] = None
    gap: Optional[float] = None
    invariants: Dict[str, bool] = Field(default_factory=dict)


class MetricsReport(BaseModel):
    experiment: str
    case: str
    cell: Dict[str, Any] = Field(default_factory=dict, description="Cell key, e.g. size and seed")
    methods: List[MethodMetrics] = Field(default_factory=list)
    flags: List[str] = Field(default_factory=list)

    def method(self, name: str) -> Optional[MethodMetrics]:
        for m in self.methods:
            if m.method == name:
                return m
        return None

    def rows(self) -> List[Dict[str, Any]]:
        """Flat table rows: cell keys, method, scalar metrics and coefficients."""
        out = []
        for m in self.methods:
            row: Dict[str, Any] = {"experiment": self.experiment, "case": self.case, **self.cell}
            row.update(m.model_dump(exclude={"coefficients", "invariants"}))
            row.update({f"coef[{k}]": v for k, v in m.coefficients.items()})
            if m.invariants:
                row["invariants_ok"] = all(m.invariants.values())
            out.append(row)
        return out
