"""
Structural checks run on every fitted tree.

Each check returns an InvariantResult; none raises. The harness attaches
the results to its reports.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from app.learning.dataset import Dataset
from app.learning.formulation import HyperParams, TreeSolution, VariableIndexMap
from app.learning.tree import NodeKind, SymbolicTree, TreeNode
from app.milp.model import Assignment

logger = logging.getLogger(__name__)

# powers of two keep the scaled split arithmetic exact
SCALE_FACTORS = (0.25, 2.0, 8.0)


@dataclass(frozen=True)
class InvariantResult:
    name: str
    passed: bool
    detail: str = ""


def routing_consistency(solution: TreeSolution, data: Dataset, epsilon: float = 1e-4) -> InvariantResult:
    """
    Tree inference sends every training point to the node the solver routed
    it to. Points within epsilon of a split on their path are exempt, since
    the routing rows only separate sides by the epsilon margin.
    """
    tree = solution.to_tree()
    reached = tree.predict_leaves_many(data)
    phi = tree.basis_branch.featurize(data.columns(), data.n_rows)
    candidates = np.flatnonzero(reached != solution.routing)
    mismatched = [
        i for i in candidates
        if all(
            abs(float(np.dot(phi[i], solution.split_coeffs[m])) - solution.thresholds[m]) > epsilon
            for m in tree.index.ancestors(int(solution.routing[i]))
        )
    ]
    if len(mismatched):
        i = int(mismatched[0])
        return InvariantResult(
            "routing_consistency", False,
            f"{len(mismatched)} points disagree, first is point {i}: "
            f"solver node {int(solution.routing[i])}, inference node {int(reached[i])}",
        )
    return InvariantResult("routing_consistency", True)


def linearization_exactness(
    assignment: Assignment, vmap: VariableIndexMap, tol: float = 1e-6
) -> InvariantResult:
    """delta equals yhat * z and y_pred equals the sum of delta."""
    x = np.asarray(assignment.values, dtype=float)
    z = np.rint(x[vmap.z[:, 1:]])
    yhat = x[vmap.yhat[:, 1:]]
    delta = x[vmap.delta[:, 1:]]
    product_gap = float(np.max(np.abs(delta - yhat * z))) if delta.size else 0.0
    sum_gap = float(np.max(np.abs(x[vmap.y_pred] - delta.sum(axis=1)))) if delta.size else 0.0
    scale = max(1.0, float(np.max(np.abs(yhat))) if yhat.size else 1.0)
    passed = product_gap <= tol * scale and sum_gap <= tol * scale
    return InvariantResult(
        "linearization_exactness", passed,
        f"max |delta - yhat*z| = {product_gap:.3g}, max |y_pred - sum delta| = {sum_gap:.3g}",
    )


def objective_is_training_mae(
    solution: TreeSolution, data: Dataset, hp: HyperParams, tol: float = 1e-6
) -> InvariantResult:
    """With zero regularization weights the objective is the training MAE of the tree."""
    if hp.lambda_c or hp.lambda_m:
        return InvariantResult("objective_is_training_mae", True, "skipped: regularized objective")
    predictions = solution.to_tree().predict_many(data)
    mae = float(np.mean(np.abs(data.y - predictions)))
    gap = abs(mae - solution.objective)
    return InvariantResult(
        "objective_is_training_mae", gap <= tol * max(1.0, abs(solution.objective)),
        f"objective {solution.objective:.12g}, inference MAE {mae:.12g}",
    )


def _scaled(tree: SymbolicTree, factor: float) -> SymbolicTree:
    nodes = {}
    for n, node in tree.nodes.items():
        if node.kind == NodeKind.BRANCH:
            nodes[n] = TreeNode(n, node.kind, a=tuple(factor * v for v in node.a), b=factor * node.b)
        else:
            nodes[n] = node
    return SymbolicTree(tree.depth, tree.basis_branch, tree.basis_leaf, nodes)


def scaling_invariance(tree: SymbolicTree, data: Dataset) -> InvariantResult:
    """Scaling a split (a, b) by a positive factor leaves every reached leaf unchanged."""
    reference = tree.predict_leaves_many(data)
    for factor in SCALE_FACTORS:
        reached = _scaled(tree, factor).predict_leaves_many(data)
        if not np.array_equal(reached, reference):
            return InvariantResult("scaling_invariance", False, f"leaves change under factor {factor}")
    return InvariantResult("scaling_invariance", True)


def document_round_trip(tree: SymbolicTree, data: Dataset) -> InvariantResult:
    """A serialized and reloaded tree predicts bit-identically."""
    reloaded = SymbolicTree.loads(tree.dumps())
    same = np.array_equal(reloaded.predict_many(data), tree.predict_many(data))
    return InvariantResult("document_round_trip", same, "" if same else "predictions differ after reload")


def check_all(
    solution: TreeSolution,
    assignment: Assignment,
    vmap: VariableIndexMap,
    data: Dataset,
    hp: HyperParams,
) -> List[InvariantResult]:
    tree = solution.to_tree()
    results = [
        routing_consistency(solution, data, hp.epsilon),
        linearization_exactness(assignment, vmap),
        objective_is_training_mae(solution, data, hp),
        scaling_invariance(tree, data),
        document_round_trip(tree, data),
    ]
    for result in results:
        if not result.passed:
            logger.warning(f"Invariant {result.name} failed: {result.detail}")
    return results


def as_dict(results: List[InvariantResult]) -> Dict[str, bool]:
    return {r.name: r.passed for r in results}
