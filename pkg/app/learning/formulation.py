"""
Tree-Learning MILP.

Builds the mixed-integer program whose optimum is a symbolic decision tree of
fixed depth, and decodes solver assignments back into a TreeSolution.

Variables (n: node, i: data point, k: basis function):
    d_n        node n branches
    z_i_n      point i is routed to node n
    a_n_k      split coefficient, omega_n_k marks it active
    b_n        split threshold
    c_n_k      leaf coefficient, w_n_k marks it active (only when N_F is set)
    yhat_i_n   leaf expression of node n evaluated at point i
    delta_i_n  yhat_i_n if z_i_n = 1 else 0
    y_pred_i   prediction for point i
    e_pos_i / e_neg_i    absolute residual split
    c_pos_n_k / c_neg_n_k  absolute coefficient split
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.core.exceptions import EmptyDatasetError, InconsistencyError
from app.learning.dataset import Dataset
from app.learning.topology import TreeIndex
from app.learning.tree import NodeKind, SymbolicTree, TreeNode
from app.milp.model import Assignment, Integrality, MilpModel, Sense
from app.symbolic.basis import BasisSet

logger = logging.getLogger(__name__)

PRIORITY_D = 3
PRIORITY_SELECT = 2
PRIORITY_Z = 1


class BigMMode(str, Enum):
    GLOBAL = "global"
    PER_ROW = "per-row"


class HyperParams(BaseModel):
    """Tree shape, sparsity caps, objective weights and variable boxes."""
    depth: int = Field(default=1, ge=1, description="Tree depth D")
    n_branch: Optional[int] = Field(default=None, ge=1, description="N_B: max active split features")
    n_leaf: Optional[int] = Field(default=None, ge=1, description="N_F: max active leaf features")
    lambda_c: float = Field(default=0.0, ge=0, description="Weight of the number of branching nodes")
    lambda_m: float = Field(default=0.0, ge=0, description="Weight of the leaf coefficient L1 norm")
    a_lb: float = -100.0
    a_ub: float = 100.0
    b_lb: float = -100.0
    b_ub: float = 100.0
    c_lb: float = -1e3
    c_ub: float = 1e3
    y_lb: float = -1e3
    y_ub: float = 1e3
    big_m_mode: BigMMode = BigMMode.PER_ROW
    big_m: float = Field(default=100.0, gt=0, description="M used in global big-M mode")
    epsilon: float = Field(default=1e-4, gt=0, description="Routing margin for strict splits")

    @model_validator(mode="after")
    def check_bounds(self) -> "HyperParams":
        for name in ("a", "b", "c", "y"):
            lb, ub = getattr(self, f"{name}_lb"), getattr(self, f"{name}_ub")
            if not (math.isfinite(lb) and math.isfinite(ub)) or lb > ub:
                raise ValueError(f"{name}_lb must not exceed {name}_ub and both must be finite")
        for name in ("a", "c", "y"):
            if getattr(self, f"{name}_lb") > 0 or getattr(self, f"{name}_ub") < 0:
                raise ValueError(f"the [{name}_lb, {name}_ub] box must contain 0")
        return self


@dataclass
class VariableIndexMap:
    """
    Home of every model variable. Arrays are indexed by node id (1-based,
    position 0 unused), point index and basis index; -1 marks "no variable".
    """
    tree: TreeIndex
    n_points: int
    d: np.ndarray  # (N+1,)
    z: np.ndarray  # (n_points, N+1)
    a: np.ndarray  # (N+1, Kb)
    omega: np.ndarray  # (N+1, Kb)
    b: np.ndarray  # (N+1,)
    c: np.ndarray  # (N+1, Kf)
    w: Optional[np.ndarray]  # (N+1, Kf) or None when N_F is unset
    yhat: np.ndarray  # (n_points, N+1)
    delta: np.ndarray  # (n_points, N+1)
    y_pred: np.ndarray  # (n_points,)
    e_pos: np.ndarray
    e_neg: np.ndarray
    c_pos: np.ndarray  # (N+1, Kf)
    c_neg: np.ndarray
    phi_branch: np.ndarray  # (n_points, Kb)
    phi_leaf: np.ndarray  # (n_points, Kf)
    y: np.ndarray  # training targets

    def all_ids(self) -> np.ndarray:
        arrays = [self.d, self.z, self.a, self.omega, self.b, self.c, self.yhat, self.delta,
                  self.y_pred, self.e_pos, self.e_neg, self.c_pos, self.c_neg]
        if self.w is not None:
            arrays.append(self.w)
        ids = np.concatenate([arr.ravel() for arr in arrays])
        return ids[ids >= 0]


@dataclass(frozen=True)
class ObjectiveTerms:
    l_acc: float
    l_c: float
    l_m: float

    def total(self, hp: HyperParams) -> float:
        return self.l_acc + hp.lambda_c * self.l_c + hp.lambda_m * self.l_m


@dataclass
class TreeSolution:
    """Decoded MILP solution."""
    depth: int
    basis_branch: BasisSet
    basis_leaf: BasisSet
    branching: Dict[int, bool]
    split_coeffs: Dict[int, np.ndarray]  # branching nodes only
    thresholds: Dict[int, float]
    leaf_coeffs: Dict[int, np.ndarray]  # active non-branching nodes only
    routing: np.ndarray  # node id per training point
    terms: ObjectiveTerms
    objective: float
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def leaves(self) -> List[int]:
        return sorted(self.leaf_coeffs)

    def to_tree(self) -> SymbolicTree:
        index = TreeIndex(self.depth)
        nodes = {}
        for n in index.nodes:
            if self.branching.get(n, False):
                nodes[n] = TreeNode(n, NodeKind.BRANCH, a=tuple(float(v) for v in self.split_coeffs[n]),
                                    b=float(self.thresholds[n]))
            elif n in self.leaf_coeffs:
                nodes[n] = TreeNode(n, NodeKind.LEAF, c=tuple(float(v) for v in self.leaf_coeffs[n]))
            else:
                nodes[n] = TreeNode(n, NodeKind.INACTIVE)
        return SymbolicTree(self.depth, self.basis_branch, self.basis_leaf, nodes)


# =============================================================================
# BUILD
# =============================================================================

def _routing_big_m(phi_branch: np.ndarray, hp: HyperParams) -> np.ndarray:
    """Per point M bounding |g(x_i) - b| + epsilon over the declared boxes."""
    if hp.big_m_mode == BigMMode.GLOBAL:
        return np.full(phi_branch.shape[0], hp.big_m)
    a_max = max(abs(hp.a_lb), abs(hp.a_ub))
    b_max = max(abs(hp.b_lb), abs(hp.b_ub))
    return a_max * np.abs(phi_branch).sum(axis=1) + b_max + hp.epsilon


def _prediction_big_m(phi_leaf: np.ndarray, hp: HyperParams) -> np.ndarray:
    if hp.big_m_mode == BigMMode.GLOBAL:
        return np.full(phi_leaf.shape[0], hp.big_m)
    c_max = max(abs(hp.c_lb), abs(hp.c_ub))
    y_max = max(abs(hp.y_lb), abs(hp.y_ub))
    return np.minimum(y_max, c_max * np.abs(phi_leaf).sum(axis=1))


def build(
    data: Dataset, basis_branch: BasisSet, basis_leaf: BasisSet, hp: HyperParams
) -> Tuple[MilpModel, VariableIndexMap]:
    """
    Build the tree-learning MILP.

    Args:
        data: Training data (nonempty)
        basis_branch: Basis functions available to splits
        basis_leaf: Basis functions available to leaf expressions
        hp: Hyperparameters

    Returns:
        (frozen model, variable index map)

    Raises:
        EmptyDatasetError: No rows
        FeaturizationError: A basis function is undefined on some row
    """
    if data.n_rows == 0:
        raise EmptyDatasetError("training dataset")
    columns = data.columns()
    phi_b = basis_branch.featurize(columns, data.n_rows)
    phi_f = basis_leaf.featurize(columns, data.n_rows)

    tree = TreeIndex(hp.depth)
    N = tree.n_nodes
    n_points = data.n_rows
    Kb, Kf = len(basis_branch), len(basis_leaf)
    model = MilpModel(name=f"symtree_D{hp.depth}_N{n_points}")

    def grid(*shape) -> np.ndarray:
        return np.full(shape, -1, dtype=int)

    d, b = grid(N + 1), grid(N + 1)
    z, yhat, delta = grid(n_points, N + 1), grid(n_points, N + 1), grid(n_points, N + 1)
    a, omega = grid(N + 1, Kb), grid(N + 1, Kb)
    c, c_pos, c_neg = grid(N + 1, Kf), grid(N + 1, Kf), grid(N + 1, Kf)
    w = grid(N + 1, Kf) if hp.n_leaf is not None else None
    y_pred, e_pos, e_neg = grid(n_points), grid(n_points), grid(n_points)

    # ---- variables -----------------------------------------------------------
    for n in tree.nodes:
        if n == 1:
            lb = ub = 1.0
        elif tree.is_terminal(n):
            lb = ub = 0.0
        else:
            lb, ub = 0.0, 1.0
        d[n] = model.add_variable(f"d_{n}", lb, ub, Integrality.BINARY, PRIORITY_D)
    for i in range(n_points):
        for n in tree.nodes:
            z[i, n] = model.add_variable(f"z_{i + 1}_{n}", 0.0, 1.0, Integrality.BINARY, PRIORITY_Z)
    for n in tree.internal:
        for k in range(Kb):
            a[n, k] = model.add_variable(f"a_{n}_{k + 1}", hp.a_lb, hp.a_ub)
            omega[n, k] = model.add_variable(
                f"omega_{n}_{k + 1}", 0.0, 1.0, Integrality.BINARY, PRIORITY_SELECT
            )
        b[n] = model.add_variable(f"b_{n}", hp.b_lb, hp.b_ub)
    for n in tree.nodes:
        for k in range(Kf):
            c[n, k] = model.add_variable(f"c_{n}_{k + 1}", hp.c_lb, hp.c_ub)
            if w is not None:
                w[n, k] = model.add_variable(
                    f"w_{n}_{k + 1}", 0.0, 1.0, Integrality.BINARY, PRIORITY_SELECT
                )
    # leaf expressions stay inside the target box at every point, not only where they predict
    c_max = max(abs(hp.c_lb), abs(hp.c_ub))
    yhat_reach = c_max * np.abs(phi_f).sum(axis=1)
    yhat_lb = np.maximum(hp.y_lb, -yhat_reach)
    yhat_ub = np.minimum(hp.y_ub, yhat_reach)
    for i in range(n_points):
        for n in tree.nodes:
            yhat[i, n] = model.add_variable(f"yhat_{i + 1}_{n}", yhat_lb[i], yhat_ub[i])
            delta[i, n] = model.add_variable(f"delta_{i + 1}_{n}", hp.y_lb, hp.y_ub)
    for i in range(n_points):
        y_pred[i] = model.add_variable(f"y_pred_{i + 1}", hp.y_lb, hp.y_ub)
        e_pos[i] = model.add_variable(f"e_pos_{i + 1}", 0.0, math.inf)
        e_neg[i] = model.add_variable(f"e_neg_{i + 1}", 0.0, math.inf)
    for n in tree.nodes:
        for k in range(Kf):
            c_pos[n, k] = model.add_variable(f"c_pos_{n}_{k + 1}", 0.0, math.inf)
            c_neg[n, k] = model.add_variable(f"c_neg_{n}_{k + 1}", 0.0, math.inf)

    # ---- tree structure ----------------------------------------------------------
    for n in tree.nodes:
        if n > 1:
            model.add_constraint([(d[n], 1.0), (d[tree.parent(n)], -1.0)], Sense.LE, 0.0,
                                 f"parent_{n}")
    for i in range(n_points):
        for n in tree.nodes:
            model.add_constraint([(z[i, n], 1.0), (d[n], 1.0)], Sense.LE, 1.0,
                                 f"no_route_branch_{i + 1}_{n}")
        model.add_constraint([(z[i, n], 1.0) for n in tree.nodes], Sense.EQ, 1.0,
                             f"assign_{i + 1}")
        for n in tree.nodes:
            for m in tree.ancestors(n):
                model.add_constraint([(z[i, n], 1.0), (d[m], -1.0)], Sense.LE, 0.0,
                                     f"ancestor_{i + 1}_{n}_{m}")

    # ---- split parameterization ----------------------------------------------------
    for n in tree.internal:
        for k in range(Kb):
            model.add_constraint([(a[n, k], 1.0), (omega[n, k], -hp.a_ub)], Sense.LE, 0.0,
                                 f"a_upper_{n}_{k + 1}")
            model.add_constraint([(a[n, k], 1.0), (omega[n, k], -hp.a_lb)], Sense.GE, 0.0,
                                 f"a_lower_{n}_{k + 1}")
        for k in range(Kb):
            model.add_constraint([(omega[n, k], 1.0), (d[n], -1.0)], Sense.LE, 0.0,
                                 f"omega_active_{n}_{k + 1}")

    # ---- routing -------------------------------------------------------------------
    big_m_route = _routing_big_m(phi_b, hp)
    for i in range(n_points):
        M = float(big_m_route[i])
        for n in tree.nodes:
            for m in tree.left_ancestors(n):
                terms = [(a[m, k], float(phi_b[i, k])) for k in range(Kb) if phi_b[i, k] != 0.0]
                terms += [(b[m], -1.0), (z[i, n], M)]
                model.add_constraint(terms, Sense.LE, M - hp.epsilon, f"route_left_{i + 1}_{n}_{m}")
            for m in tree.right_ancestors(n):
                terms = [(a[m, k], float(phi_b[i, k])) for k in range(Kb) if phi_b[i, k] != 0.0]
                terms += [(b[m], -1.0), (z[i, n], -M)]
                model.add_constraint(terms, Sense.GE, -M, f"route_right_{i + 1}_{n}_{m}")

    # ---- leaf expressions ---------------------------------------------------------
    for i in range(n_points):
        for n in tree.nodes:
            terms = [(yhat[i, n], 1.0)]
            terms += [(c[n, k], -float(phi_f[i, k])) for k in range(Kf) if phi_f[i, k] != 0.0]
            model.add_constraint(terms, Sense.EQ, 0.0, f"leaf_value_{i + 1}_{n}")

    for n in tree.nodes:
        for k in range(Kf):
            if w is not None:
                model.add_constraint([(c[n, k], 1.0), (w[n, k], -hp.c_ub)], Sense.LE, 0.0,
                                     f"c_upper_{n}_{k + 1}")
                model.add_constraint([(c[n, k], 1.0), (w[n, k], -hp.c_lb)], Sense.GE, 0.0,
                                     f"c_lower_{n}_{k + 1}")
            else:
                model.add_constraint([(c[n, k], 1.0)], Sense.LE, hp.c_ub, f"c_upper_{n}_{k + 1}")
                model.add_constraint([(c[n, k], 1.0)], Sense.GE, hp.c_lb, f"c_lower_{n}_{k + 1}")
        if w is not None:
            for k in range(Kf):
                model.add_constraint([(w[n, k], 1.0), (d[n], 1.0)], Sense.LE, 1.0,
                                     f"w_inactive_{n}_{k + 1}")

    # ---- linearized selection delta = yhat * z ---------------------------------------
    big_m_pred = _prediction_big_m(phi_f, hp)
    for i in range(n_points):
        M = float(big_m_pred[i])
        for n in tree.nodes:
            model.add_constraint([(delta[i, n], 1.0), (z[i, n], -hp.y_ub)], Sense.LE, 0.0,
                                 f"delta_upper_{i + 1}_{n}")
            model.add_constraint([(delta[i, n], 1.0), (z[i, n], -hp.y_lb)], Sense.GE, 0.0,
                                 f"delta_lower_{i + 1}_{n}")
            model.add_constraint([(delta[i, n], 1.0), (yhat[i, n], -1.0), (z[i, n], M)],
                                 Sense.LE, M, f"delta_track_upper_{i + 1}_{n}")
            model.add_constraint([(delta[i, n], 1.0), (yhat[i, n], -1.0), (z[i, n], -M)],
                                 Sense.GE, -M, f"delta_track_lower_{i + 1}_{n}")

    for i in range(n_points):
        terms = [(y_pred[i], 1.0)] + [(delta[i, n], -1.0) for n in tree.nodes]
        model.add_constraint(terms, Sense.EQ, 0.0, f"prediction_{i + 1}")
    for i in range(n_points):
        model.add_constraint([(e_pos[i], 1.0), (e_neg[i], -1.0), (y_pred[i], 1.0)],
                             Sense.EQ, float(data.y[i]), f"residual_{i + 1}")
    for n in tree.nodes:
        for k in range(Kf):
            model.add_constraint([(c_pos[n, k], 1.0), (c_neg[n, k], -1.0), (c[n, k], -1.0)],
                                 Sense.EQ, 0.0, f"c_abs_{n}_{k + 1}")

    # ---- sparsity caps ----------------------------------------------------------------
    if hp.n_branch is not None:
        for n in tree.internal:
            model.add_constraint([(omega[n, k], 1.0) for k in range(Kb)], Sense.LE,
                                 float(hp.n_branch), f"split_cap_{n}")
    if w is not None:
        for n in tree.nodes:
            model.add_constraint([(w[n, k], 1.0) for k in range(Kf)], Sense.LE,
                                 float(hp.n_leaf), f"leaf_cap_{n}")

    # ---- objective ------------------------------------------------------------------
    objective = []
    for i in range(n_points):
        objective += [(e_pos[i], 1.0 / n_points), (e_neg[i], 1.0 / n_points)]
    if hp.lambda_c:
        objective += [(d[n], hp.lambda_c) for n in tree.nodes]
    if hp.lambda_m:
        for n in tree.nodes:
            for k in range(Kf):
                objective += [(c_pos[n, k], hp.lambda_m), (c_neg[n, k], hp.lambda_m)]
    model.set_objective(objective)
    model.freeze()

    vmap = VariableIndexMap(
        tree=tree, n_points=n_points, d=d, z=z, a=a, omega=omega, b=b, c=c, w=w,
        yhat=yhat, delta=delta, y_pred=y_pred, e_pos=e_pos, e_neg=e_neg,
        c_pos=c_pos, c_neg=c_neg, phi_branch=phi_b, phi_leaf=phi_f,
        y=np.array(data.y, dtype=float),
    )
    logger.info(
        f"Built tree MILP: depth={hp.depth}, points={n_points}, "
        f"{model.num_variables} variables ({model.num_binaries} binary), "
        f"{model.num_constraints} constraints"
    )
    return model, vmap


# =============================================================================
# DECODE
# =============================================================================

def decode(
    assignment: Assignment,
    vmap: VariableIndexMap,
    hp: HyperParams,
    basis_branch: BasisSet,
    basis_leaf: BasisSet,
    tol: float = 1e-6,
) -> TreeSolution:
    """
    Read the tree out of a solver assignment.

    Binaries are rounded at 0.5; continuous coefficients are taken verbatim.
    Leaf coefficients of nodes that received no training point are zeroed.
    A threshold lying at most epsilon above a right-routed point is lowered
    onto that point, so strict-inequality inference reproduces the routing.

    Raises:
        InconsistencyError: No solution, routing that breaks the tree logic,
            or an objective that does not match its independent recomputation
    """
    if not assignment.status.has_solution:
        raise InconsistencyError(f"cannot decode an assignment with status {assignment.status.value}")
    x = np.asarray(assignment.values, dtype=float)
    tree = vmap.tree

    branching = {n: bool(x[vmap.d[n]] > 0.5) for n in tree.nodes}
    if not branching[1]:
        raise InconsistencyError("root does not branch")

    z = x[vmap.z[:, 1:]] > 0.5
    per_point = z.sum(axis=1)
    if np.any(per_point != 1):
        bad = int(np.flatnonzero(per_point != 1)[0])
        raise InconsistencyError(f"point {bad} is routed to {int(per_point[bad])} nodes")
    routing = np.argmax(z, axis=1) + 1
    for i, n in enumerate(routing):
        if branching[n]:
            raise InconsistencyError(f"point {i} is routed to branching node {n}")
        if not all(branching[m] for m in tree.ancestors(int(n))):
            raise InconsistencyError(f"point {i} is routed to node {n} below a non-branching node")

    split_coeffs, thresholds = {}, {}
    for n in tree.internal:
        if branching[n]:
            split_coeffs[n] = x[vmap.a[n]].copy()
            thresholds[n] = float(x[vmap.b[n]])

    # a point routed right may sit a feasibility tolerance below its threshold
    for m, coeffs in split_coeffs.items():
        right = [i for i, n in enumerate(routing) if m in tree.right_ancestors(int(n))]
        if not right:
            continue
        lowest = min(float(np.dot(vmap.phi_branch[i], coeffs)) for i in right)
        if 0.0 < thresholds[m] - lowest <= hp.epsilon:
            thresholds[m] = lowest

    routed_nodes = set(int(n) for n in routing)
    leaf_coeffs = {}
    for n in tree.nodes:
        if branching[n] or n == 1 or not branching[tree.parent(n)]:
            continue
        coeffs = x[vmap.c[n]].copy()
        if n not in routed_nodes:
            coeffs[:] = 0.0
        leaf_coeffs[n] = coeffs

    # independent recomputation from the raw coefficients
    c_all = x[vmap.c[1:]]
    y_model = np.array([
        float(np.dot(vmap.phi_leaf[i], x[vmap.c[n]])) for i, n in enumerate(routing)
    ])
    l_acc = float(np.mean(np.abs(vmap.y - y_model)))
    l_c = float(sum(branching.values()))
    l_m = float(np.abs(c_all).sum())
    recomputed = l_acc + hp.lambda_c * l_c + hp.lambda_m * l_m
    if abs(recomputed - assignment.objective) > tol * max(1.0, abs(assignment.objective)):
        raise InconsistencyError(
            f"objective {assignment.objective!r} disagrees with recomputed {recomputed!r}"
        )

    l_m_leaves = float(sum(np.abs(v).sum() for v in leaf_coeffs.values()))
    return TreeSolution(
        depth=tree.depth,
        basis_branch=basis_branch,
        basis_leaf=basis_leaf,
        branching=branching,
        split_coeffs=split_coeffs,
        thresholds=thresholds,
        leaf_coeffs=leaf_coeffs,
        routing=routing.astype(int),
        terms=ObjectiveTerms(l_acc, l_c, l_m_leaves),
        objective=float(assignment.objective),
    )


def objective_terms(solution: TreeSolution, data: Dataset) -> ObjectiveTerms:
    """L_acc by tree inference on the data, L_c branching count, L_m leaf L1 norm."""
    tree = solution.to_tree()
    predictions = tree.predict_many(data)
    l_acc = float(np.mean(np.abs(data.y - predictions))) if data.n_rows else 0.0
    l_c = float(sum(solution.branching.values()))
    l_m = float(sum(np.abs(v).sum() for v in solution.leaf_coeffs.values()))
    return ObjectiveTerms(l_acc, l_c, l_m)
