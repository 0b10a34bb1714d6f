"""
Shared fixtures.
"""
import numpy as np
import pytest

from app.learning.dataset import Dataset
from app.learning.formulation import HyperParams
from app.learning.tree import NodeKind, SymbolicTree, TreeNode
from app.milp.model import Integrality, MilpModel, Sense
from app.solver.config import SolverConfig
from app.symbolic.basis import BasisRole, BasisSet

TINY_X = [-1.0, -0.5, 0.5, 1.0]
TINY_Y = [0.0, 0.0, 0.5, 1.0]


@pytest.fixture
def tiny_data() -> Dataset:
    """y = 0 for x < 0 and y = x otherwise; a depth-1 tree fits it exactly."""
    return Dataset(("x",), np.array(TINY_X).reshape(-1, 1), np.array(TINY_Y))


@pytest.fixture
def tiny_bases():
    return (
        BasisSet.from_texts(["x"], ("x",), BasisRole.BRANCHING),
        BasisSet.from_texts(["1", "x"], ("x",), BasisRole.LEAF),
    )


@pytest.fixture
def tiny_hp() -> HyperParams:
    return HyperParams(depth=1)


@pytest.fixture
def exact_solver() -> SolverConfig:
    return SolverConfig(rel_gap=1e-9, abs_gap=1e-9)


@pytest.fixture
def knapsack() -> MilpModel:
    """max 5a + 4b + 3c over three knapsack rows, written as a minimization."""
    model = MilpModel("knapsack")
    a = model.add_variable("a", 0, 1, Integrality.BINARY)
    b = model.add_variable("b", 0, 1, Integrality.BINARY)
    c = model.add_variable("c", 0, 1, Integrality.BINARY)
    model.add_constraint([(a, 2), (b, 3), (c, 1)], Sense.LE, 5, "cap1")
    model.add_constraint([(a, 4), (b, 1), (c, 2)], Sense.LE, 11, "cap2")
    model.add_constraint([(a, 3), (b, 4), (c, 2)], Sense.LE, 8, "cap3")
    model.set_objective([(a, -5), (b, -4), (c, -3)])
    return model.freeze()


@pytest.fixture
def disk_tree() -> SymbolicTree:
    """Depth-1 tree splitting case 1 on the disk x1^2 + x2^2 < 2.5."""
    variables = ("x1", "x2")
    basis_branch = BasisSet.from_texts(["x1^2", "x2^2"], variables, BasisRole.BRANCHING)
    basis_leaf = BasisSet.from_texts(["x1^2", "x2^2", "x2"], variables, BasisRole.LEAF)
    nodes = {
        1: TreeNode(1, NodeKind.BRANCH, a=(1.0, 1.0), b=2.5),
        2: TreeNode(2, NodeKind.LEAF, c=(1.0, 1.0, 0.0)),
        3: TreeNode(3, NodeKind.LEAF, c=(1.0, 0.0, 1.0)),
    }
    return SymbolicTree(1, basis_branch, basis_leaf, nodes)
