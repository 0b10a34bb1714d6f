"""
Baseline Models.

The comparison methods: L1 sparse regression over a basis set, and greedy
regression trees with constant or linear leaves over the raw inputs. Greedy
trees also seed branch-and-bound with a warm start.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import EmptyDatasetError, InconsistencyError, UserError
from app.learning.dataset import Dataset
from app.learning.formulation import HyperParams, VariableIndexMap
from app.learning.topology import in_order
from app.milp.model import Assignment, MilpModel, Sense, SolveStatus
from app.solver.config import SolverConfig
from app.solver.simplex import solve_lp
from app.symbolic.basis import BasisSet, print_combination, print_piecewise

logger = logging.getLogger(__name__)

Columns = Dict[str, np.ndarray]


# =============================================================================
# SPARSE REGRESSION
# =============================================================================

@dataclass
class SparseModel:
    """Single global expression sum_k c_k * phi_k(x)."""
    basis: BasisSet
    coefficients: np.ndarray
    objective: float  # training mean absolute error at the LP optimum

    def predict_many(self, data: Union[Dataset, Columns]) -> np.ndarray:
        if isinstance(data, Dataset):
            columns, n_rows = data.columns(), data.n_rows
        else:
            columns = {k: np.asarray(v, dtype=float) for k, v in data.items()}
            n_rows = len(next(iter(columns.values()))) if columns else 0
        phi = self.basis.featurize(columns, n_rows)
        return np.array([float(np.dot(phi[i], self.coefficients)) for i in range(n_rows)])

    def predict(self, row) -> float:
        return float(np.dot(self.basis.evaluate_row(row), self.coefficients))

    def to_text(self, digits: int = 4) -> str:
        return print_combination(self.coefficients, self.basis, digits=digits)


def _l1_fit(phi: np.ndarray, y: np.ndarray, config: Optional[SolverConfig] = None) -> Tuple[np.ndarray, float]:
    """
    Least absolute deviations: min (1/N) sum |e_i| with e = y - phi c, as an
    LP over free coefficients and split residuals e_pos - e_neg.
    """
    n_rows, n_basis = phi.shape
    model = MilpModel(name=f"l1_fit_N{n_rows}")
    coeffs = [model.add_variable(f"c_{k + 1}", -math.inf, math.inf) for k in range(n_basis)]
    e_pos = [model.add_variable(f"e_pos_{i + 1}", 0.0, math.inf) for i in range(n_rows)]
    e_neg = [model.add_variable(f"e_neg_{i + 1}", 0.0, math.inf) for i in range(n_rows)]
    for i in range(n_rows):
        terms = [(e_pos[i], 1.0), (e_neg[i], -1.0)]
        terms += [(coeffs[k], float(phi[i, k])) for k in range(n_basis) if phi[i, k] != 0.0]
        model.add_constraint(terms, Sense.EQ, float(y[i]), f"residual_{i + 1}")
    model.set_objective([(v, 1.0 / n_rows) for v in e_pos + e_neg])
    model.freeze()
    result = solve_lp(model, config)
    if result.status != SolveStatus.OPTIMAL:
        raise InconsistencyError(f"L1 regression LP ended with status {result.status.value}")
    return np.array([result[v] for v in coeffs]), float(result.objective)


def fit_sparse(
    data: Dataset, basis_leaf: BasisSet, config: Optional[SolverConfig] = None
) -> SparseModel:
    """
    Fit one expression over the leaf basis minimizing the training MAE.

    Raises:
        EmptyDatasetError: No rows
        FeaturizationError: A basis function is undefined on some row
    """
    if data.n_rows == 0:
        raise EmptyDatasetError("training dataset")
    phi = basis_leaf.featurize(data.columns(), data.n_rows)
    coefficients, objective = _l1_fit(phi, data.y, config)
    logger.debug(f"Sparse regression on {data.n_rows} rows: objective={objective:.6g}")
    return SparseModel(basis_leaf, coefficients, objective)


# =============================================================================
# GREEDY TREES
# =============================================================================

class LeafKind(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


@dataclass
class GreedyNode:
    id: int
    n_samples: int
    feature: Optional[int] = None  # index into feature_names; None for leaves
    threshold: Optional[float] = None
    # leaves: [value] for constant leaves, [intercept, slope_1, ...] for linear ones
    params: Optional[np.ndarray] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class GreedyTree:
    """Axis-aligned regression tree in heap numbering (left iff x_j < threshold)."""
    depth: int
    leaf_kind: LeafKind
    feature_names: Tuple[str, ...]
    nodes: Dict[int, GreedyNode] = field(default_factory=dict)

    @property
    def branches(self) -> List[int]:
        return sorted(n for n, node in self.nodes.items() if not node.is_leaf)

    @property
    def leaves(self) -> List[int]:
        return sorted(n for n, node in self.nodes.items() if node.is_leaf)

    @property
    def fitted_depth(self) -> int:
        return max(n.bit_length() - 1 for n in self.nodes)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row of X."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=int)
        for i in range(X.shape[0]):
            n = 1
            while not self.nodes[n].is_leaf:
                node = self.nodes[n]
                n = 2 * n if X[i, node.feature] < node.threshold else 2 * n + 1
            out[i] = n
        return out

    def _leaf_value(self, n: int, X: np.ndarray) -> np.ndarray:
        params = self.nodes[n].params
        if self.leaf_kind == LeafKind.CONSTANT:
            return np.full(X.shape[0], params[0])
        return params[0] + X @ params[1:]

    def predict_many(self, data: Union[Dataset, np.ndarray]) -> np.ndarray:
        X = self._matrix(data)
        leaves = self.apply(X)
        out = np.empty(X.shape[0])
        for n in np.unique(leaves):
            mask = leaves == n
            out[mask] = self._leaf_value(int(n), X[mask])
        return out

    def _matrix(self, data: Union[Dataset, np.ndarray]) -> np.ndarray:
        if isinstance(data, Dataset):
            missing = [name for name in self.feature_names if name not in data.feature_names]
            if missing:
                raise UserError(f"dataset lacks features {missing}")
            return np.column_stack([data.column(name) for name in self.feature_names]) \
                if self.feature_names else np.empty((data.n_rows, 0))
        return np.asarray(data, dtype=float)

    def to_text(self, digits: int = 4) -> str:
        pieces = []
        for n in in_order(self.leaves):
            conditions = []
            child = n
            while child > 1:
                parent = self.nodes[child // 2]
                op = "<" if child % 2 == 0 else ">="
                conditions.append(f"{self.feature_names[parent.feature]} {op} {parent.threshold:.{digits}g}")
                child //= 2
            params = self.nodes[n].params
            if self.leaf_kind == LeafKind.CONSTANT:
                expression = f"{params[0]:.{digits}g}"
            else:
                slopes = " ".join(
                    f"{'-' if v < 0 else '+'} {abs(v):.{digits}g}*{name}"
                    for v, name in zip(params[1:], self.feature_names)
                )
                expression = f"{params[0]:.{digits}g} {slopes}".strip()
            pieces.append((expression, conditions[::-1]))
        return print_piecewise(pieces)


def _fit_leaf(X: np.ndarray, y: np.ndarray, kind: LeafKind) -> Tuple[np.ndarray, float]:
    """Leaf parameters and the sum of squared errors they leave."""
    if kind == LeafKind.CONSTANT:
        mean = float(np.mean(y))
        return np.array([mean]), float(np.sum((y - mean) ** 2))
    design = np.column_stack([np.ones(X.shape[0]), X])
    params, *_ = np.linalg.lstsq(design, y, rcond=None)
    return params, float(np.sum((y - design @ params) ** 2))


def _best_split(
    X: np.ndarray, y: np.ndarray, kind: LeafKind, min_samples: int
) -> Optional[Tuple[int, float, float]]:
    """(feature, threshold, summed child SSE) of the best split, or None."""
    n_rows = X.shape[0]
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        if kind == LeafKind.CONSTANT:
            s1, s2 = np.cumsum(ys), np.cumsum(ys ** 2)
        for p in range(min_samples, n_rows - min_samples + 1):
            if not xs[p - 1] < xs[p]:
                continue
            threshold = 0.5 * (xs[p - 1] + xs[p])
            if not xs[p - 1] < threshold <= xs[p]:
                continue
            if kind == LeafKind.CONSTANT:
                left = s2[p - 1] - s1[p - 1] ** 2 / p
                right_sum = s1[-1] - s1[p - 1]
                right = (s2[-1] - s2[p - 1]) - right_sum ** 2 / (n_rows - p)
                error = max(left, 0.0) + max(right, 0.0)
            else:
                rows = order[:p], order[p:]
                error = sum(_fit_leaf(X[r], y[r], kind)[1] for r in rows)
            if best is None or error < best[2]:
                best = (j, float(threshold), float(error))
    return best


def fit_greedy_tree(
    data: Dataset,
    depth: int,
    leaf_kind: Union[LeafKind, str] = LeafKind.CONSTANT,
    min_samples: int = 2,
) -> GreedyTree:
    """
    Grow a regression tree top-down, each split minimizing the summed child
    squared error (variance reduction for constant leaves).

    Nodes stop splitting at the depth limit, when fewer than 2 * min_samples
    rows remain, or when no threshold separates two distinct values. Data
    with all rows identical yields a single leaf.

    Raises:
        EmptyDatasetError: No rows
    """
    if data.n_rows == 0:
        raise EmptyDatasetError("training dataset")
    if depth < 1 or min_samples < 1:
        raise UserError("greedy tree depth and min_samples must be at least 1")
    kind = LeafKind(leaf_kind)
    X, y = data.X, data.y
    tree = GreedyTree(depth=depth, leaf_kind=kind, feature_names=data.feature_names)

    def grow(n: int, rows: np.ndarray, level: int) -> None:
        params, _ = _fit_leaf(X[rows], y[rows], kind)
        node = GreedyNode(id=n, n_samples=len(rows), params=params)
        tree.nodes[n] = node
        if level >= depth or len(rows) < 2 * min_samples:
            return
        split = _best_split(X[rows], y[rows], kind, min_samples)
        if split is None:
            return
        feature, threshold, _ = split
        node.feature, node.threshold, node.params = feature, threshold, None
        left = X[rows, feature] < threshold
        grow(2 * n, rows[left], level + 1)
        grow(2 * n + 1, rows[~left], level + 1)

    grow(1, np.arange(data.n_rows), 0)
    logger.debug(f"Greedy {kind.value}-leaf tree: {len(tree.branches)} splits, {len(tree.leaves)} leaves")
    return tree


# =============================================================================
# WARM START
# =============================================================================

def _leaf_selection(phi: np.ndarray, y: np.ndarray, n_leaf: int, config: Optional[SolverConfig]) -> np.ndarray:
    """Indicator of the n_leaf basis functions with largest |c_k| * max_i |phi_ik|."""
    coefficients, _ = _l1_fit(phi, y, config)
    score = np.abs(coefficients) * np.abs(phi).max(axis=0)
    keep = np.argsort(-score, kind="stable")[:n_leaf]
    selected = np.zeros(phi.shape[1])
    selected[keep] = 1.0
    return selected


def _integer_part(
    vmap: VariableIndexMap,
    routing: np.ndarray,
    splits: Dict[int, int],
    hp: HyperParams,
    config: Optional[SolverConfig],
) -> Dict[int, float]:
    """Values of every binary for a given topology (node -> split basis index) and routing."""
    tree = vmap.tree
    fixed: Dict[int, float] = {}
    for n in tree.nodes:
        fixed[int(vmap.d[n])] = 1.0 if n in splits else 0.0
    for i, target in enumerate(routing):
        for n in tree.nodes:
            fixed[int(vmap.z[i, n])] = 1.0 if n == target else 0.0
    for n in tree.internal:
        for k in range(vmap.omega.shape[1]):
            fixed[int(vmap.omega[n, k])] = 1.0 if splits.get(n) == k else 0.0
    if vmap.w is not None:
        for n in tree.nodes:
            rows = np.flatnonzero(routing == n)
            if n in splits or not len(rows):
                selected = np.zeros(vmap.w.shape[1])
            else:
                selected = _leaf_selection(vmap.phi_leaf[rows], vmap.y[rows], hp.n_leaf, config)
            for k, value in enumerate(selected):
                fixed[int(vmap.w[n, k])] = float(value)
    return fixed


def _complete(model: MilpModel, fixed: Dict[int, float], config: SolverConfig) -> Optional[Assignment]:
    """Solve the LP over the continuous variables with every binary fixed."""
    form = model.dense()
    lower, upper = form.lower.copy(), form.upper.copy()
    for var, value in fixed.items():
        if not lower[var] <= value <= upper[var]:
            return None
        lower[var] = upper[var] = value
    result = solve_lp(model, config, lower, upper)
    if result.status != SolveStatus.OPTIMAL:
        logger.debug(f"Warm-start LP ended with status {result.status.value}")
        return None
    if not model.is_feasible(result.values, config.feasibility_tol, config.integrality_tol):
        logger.debug("Warm-start LP solution failed the feasibility check")
        return None
    return Assignment(result.values, result.objective, SolveStatus.FEASIBLE_WITH_GAP, result.iterations)


def warm_start_assignment(
    greedy: GreedyTree,
    data: Dataset,
    hp: HyperParams,
    basis_branch: BasisSet,
    vmap: VariableIndexMap,
    model: MilpModel,
    config: Optional[SolverConfig] = None,
) -> Assignment:
    """
    Turn a greedy tree into an integer-feasible assignment of the tree MILP.

    Binaries follow the greedy topology and routing; split, threshold and
    leaf coefficients are re-fit by an LP with the binaries fixed. When the
    greedy tree cannot be represented (too deep, a split feature missing from
    the branching basis, routing margin too small) the fallback routes every
    point to node 2 under a root with an all-zero split.

    Returns:
        Feasible assignment (status feasible-with-gap), or an assignment
        without solution if even the fallback LP fails
    """
    config = config or SolverConfig()
    candidate = None
    splits: Dict[int, int] = {}
    representable = greedy.fitted_depth <= hp.depth and bool(greedy.branches)
    for n in greedy.branches:
        k = basis_branch.index_of_variable(greedy.feature_names[greedy.nodes[n].feature])
        if k < 0:
            representable = False
            break
        splits[n] = k
    if representable:
        X = np.column_stack([data.column(name) for name in greedy.feature_names])
        routing = greedy.apply(X)
        candidate = _complete(model, _integer_part(vmap, routing, splits, hp, config), config)
        if candidate is None:
            logger.info("Greedy warm start is infeasible for the tree MILP; using the fallback")
    else:
        logger.info("Greedy tree is not representable with the branching basis; using the fallback")

    if candidate is None:
        routing = np.full(data.n_rows, 2, dtype=int)
        candidate = _complete(model, _integer_part(vmap, routing, {1: -1}, hp, config), config)
    if candidate is None:
        logger.warning("Warm-start fallback LP failed; solving without a warm start")
        return Assignment.without_solution(SolveStatus.INFEASIBLE, model.num_variables)
    logger.debug(f"Warm start objective {candidate.objective:.6g}")
    return candidate
