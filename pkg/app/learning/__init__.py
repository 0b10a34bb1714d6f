"""
Learning Package.

Datasets, the tree-learning MILP, the learned tree artifact and the
baseline models.
"""
from app.learning.dataset import Dataset
from app.learning.formulation import (
    BigMMode,
    HyperParams,
    ObjectiveTerms,
    TreeSolution,
    VariableIndexMap,
    build,
    decode,
    objective_terms,
)
from app.learning.tree import NodeKind, SymbolicTree, TreeNode
from app.learning.baselines import (
    GreedyTree,
    LeafKind,
    SparseModel,
    fit_greedy_tree,
    fit_sparse,
    warm_start_assignment,
)

__all__ = [
    "Dataset",
    "BigMMode",
    "HyperParams",
    "ObjectiveTerms",
    "TreeSolution",
    "VariableIndexMap",
    "build",
    "decode",
    "objective_terms",
    "NodeKind",
    "SymbolicTree",
    "TreeNode",
    "GreedyTree",
    "LeafKind",
    "SparseModel",
    "fit_greedy_tree",
    "fit_sparse",
    "warm_start_assignment",
]
