"""
Ground truth of a case study, expressed over the case's own basis sets so
learned trees can be scored coefficient by coefficient.
"""
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from app.learning.dataset import Dataset
from app.symbolic.basis import BasisRole, BasisSet


@dataclass(frozen=True)
class CaseTruth:
    variables: Tuple[str, ...]
    basis_branch: Tuple[str, ...]
    basis_leaf: Tuple[str, ...]
    split: Tuple[float, ...]  # over basis_branch, regime 0 iff split . phi < threshold
    threshold: float
    leaves: Tuple[Tuple[float, ...], Tuple[float, ...]]  # regime 0, regime 1 over basis_leaf
    regime: Callable[[Dataset], np.ndarray]  # 0/1 label per row

    def bases(self) -> Tuple[BasisSet, BasisSet]:
        return (
            BasisSet.from_texts(self.basis_branch, self.variables, BasisRole.BRANCHING),
            BasisSet.from_texts(self.basis_leaf, self.variables, BasisRole.LEAF),
        )

    def normalized_split(self) -> Tuple[np.ndarray, float]:
        a = np.array(self.split, dtype=float)
        scale = float(np.max(np.abs(a)))
        return a / scale, self.threshold / scale
