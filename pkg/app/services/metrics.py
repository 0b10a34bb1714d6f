"""
Metrics.

Test errors, rollout errors and coefficient errors against a case's ground
truth. Learned leaves are matched to true regimes by majority vote of the
training points routed to them.
"""
import math
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from app.casestudies.truth import CaseTruth
from app.casestudies.two_tank import Dh1Model, FlowSchedule, Trajectory, rollout
from app.core.exceptions import UserError
from app.learning.dataset import Dataset
from app.learning.tree import SymbolicTree


def _pair(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape:
        raise UserError(f"length mismatch: {pred.shape[0]} predictions, {truth.shape[0]} targets")
    if pred.size == 0:
        raise UserError("cannot score an empty prediction vector")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def schedule_of(trajectory: Trajectory) -> FlowSchedule:
    """Inflows of a trajectory as a schedule that changes at every grid point."""
    return FlowSchedule.from_levels(trajectory.t, trajectory.inputs[:, 0], trajectory.inputs[:, 1])


def rollout_rmse(model: Dh1Model, trajectory: Trajectory) -> float:
    """
    RMSE of h1 between the reference trajectory and an RK4 rollout that uses
    the learned dh1/dt from the same initial state and inflows.
    """
    if len(trajectory) < 2:
        raise UserError("rollout needs a trajectory with at least two samples")
    dt = float(trajectory.t[1] - trajectory.t[0])
    simulated = rollout(
        model,
        initial=(float(trajectory.states[0, 0]), float(trajectory.states[0, 1])),
        schedule=schedule_of(trajectory),
        t_end=float(trajectory.t[-1]),
        dt=dt,
    )
    return rmse(simulated.h1, trajectory.h1)


def tree_dh1_model(tree: SymbolicTree) -> Dh1Model:
    def dh1(h1: float, h2: float, f1: float, f2: float) -> float:
        return tree.predict({"h1": h1, "h2": h2, "F1": f1, "F2": f2})
    return dh1


# =============================================================================
# COEFFICIENT ERRORS
# =============================================================================

def match_leaves(tree: SymbolicTree, data: Dataset, regimes: np.ndarray) -> Dict[int, int]:
    """
    Leaf id -> true regime label by majority vote of routed training points.

    Vote ties go to the lower regime label. Leaves without points take the
    label used by the fewest leaves so far, visiting leaves by node id.
    """
    reached = tree.predict_leaves_many(data)
    labels = sorted(int(v) for v in np.unique(regimes)) or [0]
    matching: Dict[int, int] = {}
    for n in tree.leaves:
        votes = np.asarray(regimes)[reached == n]
        if len(votes):
            counts = [(int(np.sum(votes == label)), -label) for label in labels]
            matching[n] = -max(counts)[1]
    for n in tree.leaves:
        if n not in matching:
            used = [list(matching.values()).count(label) for label in labels]
            matching[n] = labels[int(np.argmin(used))]
    return dict(sorted(matching.items()))


def coeff_l2(
    learned: Mapping[int, Sequence[float]],
    truth: Sequence[Sequence[float]],
    matching: Mapping[int, int],
) -> float:
    """sqrt(sum over matched leaves of ||learned_n - truth_regime(n)||^2)."""
    total = 0.0
    for n, regime in matching.items():
        if n not in learned:
            raise UserError(f"leaf {n} is matched but has no coefficients")
        a = np.asarray(learned[n], dtype=float)
        b = np.asarray(truth[regime], dtype=float)
        if a.shape != b.shape:
            raise UserError(f"leaf {n} has {a.size} coefficients, regime {regime} has {b.size}")
        total += float(np.sum((a - b) ** 2))
    return math.sqrt(total)


def leaf_coefficients(tree: SymbolicTree) -> Dict[int, np.ndarray]:
    return {n: tree.leaf(n) for n in tree.leaves}


def oriented_root_split(tree: SymbolicTree, matching: Mapping[int, int]) -> Tuple[np.ndarray, float]:
    """
    Normalized root split, negated when the left subtree holds regime 1 so
    that regime 0 always lies on the "< threshold" side.
    """
    a, b = tree.normalized_split(1)
    left_leaves = [n for n in tree.leaves if _in_left_subtree(n)]
    left_regime = matching.get(min(left_leaves), 0) if left_leaves else 0
    if left_regime == 1:
        a, b = -a, -b
    return a, float(b)


def _in_left_subtree(n: int) -> bool:
    while n > 3:
        n //= 2
    return n == 2


def split_l2(tree: SymbolicTree, truth: CaseTruth, matching: Mapping[int, int]) -> float:
    a, b = oriented_root_split(tree, matching)
    ta, tb = truth.normalized_split()
    if a.shape != ta.shape:
        raise UserError(f"split has {a.size} coefficients, truth has {ta.size}")
    return float(np.sqrt(np.sum((a - ta) ** 2) + (b - tb) ** 2))


def form_preserved(
    tree: SymbolicTree, truth: CaseTruth, matching: Mapping[int, int], tol: float = 1e-3
) -> bool:
    """Every matched leaf uses exactly the basis functions its true regime uses."""
    for n, regime in matching.items():
        learned = np.abs(tree.leaf(n)) > tol
        expected = np.abs(np.asarray(truth.leaves[regime])) > 0
        if not np.array_equal(learned, expected):
            return False
    return True
