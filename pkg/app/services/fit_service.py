"""
Fit Service.

Business logic for learning a symbolic decision tree: build the MILP,
warm-start it from a greedy tree, solve, decode and check the result.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from app.core.config import settings
from app.learning.baselines import LeafKind, fit_greedy_tree, warm_start_assignment
from app.learning.dataset import Dataset
from app.learning.formulation import HyperParams, TreeSolution, build, decode
from app.learning.invariants import InvariantResult, as_dict, check_all
from app.learning.tree import SymbolicTree
from app.milp.model import Assignment, SolveStatus
from app.milp.mps import write_mps
from app.solver.bnb import solve_milp
from app.solver.config import BnbStats, SolverConfig
from app.symbolic.basis import BasisSet

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    status: SolveStatus
    assignment: Assignment
    stats: BnbStats
    model_size: Dict[str, int]
    solution: Optional[TreeSolution] = None
    tree: Optional[SymbolicTree] = None
    invariants: List[InvariantResult] = field(default_factory=list)
    warm_start_objective: Optional[float] = None

    @property
    def equation(self) -> Optional[str]:
        return self.tree.to_text() if self.tree is not None else None

    @property
    def invariants_ok(self) -> Dict[str, bool]:
        return as_dict(self.invariants)


def default_solver_config() -> SolverConfig:
    return SolverConfig(node_limit=settings.DEFAULT_NODE_LIMIT, time_limit_s=settings.DEFAULT_TIME_LIMIT_S)


class FitService:
    """
    Service class for fitting symbolic decision trees.

    Stateless; one instance may serve concurrent requests since every fit
    owns its model and solver state.
    """

    def fit(
        self,
        data: Dataset,
        basis_branch: BasisSet,
        basis_leaf: BasisSet,
        hp: HyperParams,
        solver: Optional[SolverConfig] = None,
        warm_start: bool = True,
        check_invariants: bool = True,
    ) -> FitResult:
        """
        Learn a tree by solving the MILP to optimality (or a limit).

        Args:
            data: Training data
            basis_branch: Split basis
            basis_leaf: Leaf basis
            hp: Hyperparameters
            solver: Solver configuration
            warm_start: Seed the search with a greedy linear-leaf tree
            check_invariants: Run the structural checks on the result

        Returns:
            FitResult; ``tree`` is None when the solver found no solution

        Raises:
            EmptyDatasetError: No rows
            FeaturizationError: A basis function is undefined on some row
        """
        data.require_rows()
        solver = solver or default_solver_config()
        start = time.perf_counter()
        logger.info(
            f"Fitting symbolic tree: {data.n_rows} rows, depth={hp.depth}, "
            f"{len(basis_branch)} split / {len(basis_leaf)} leaf basis functions"
        )
        model, vmap = build(data, basis_branch, basis_leaf, hp)

        incumbent = None
        if warm_start:
            greedy = fit_greedy_tree(data, depth=hp.depth, leaf_kind=LeafKind.LINEAR)
            candidate = warm_start_assignment(greedy, data, hp, basis_branch, vmap, model, solver)
            if candidate.status.has_solution:
                incumbent = candidate

        assignment, stats = solve_milp(model, solver, incumbent)
        result = FitResult(
            status=assignment.status,
            assignment=assignment,
            stats=stats,
            model_size=model.summary(),
            warm_start_objective=incumbent.objective if incumbent is not None else None,
        )
        if assignment.status.has_solution:
            result.solution = decode(assignment, vmap, hp, basis_branch, basis_leaf)
            result.tree = result.solution.to_tree()
            if check_invariants:
                result.invariants = check_all(result.solution, assignment, vmap, data, hp)

        elapsed = time.perf_counter() - start
        logger.info(
            f"Fit finished: status={assignment.status.value}, objective={assignment.objective:.6g}, "
            f"nodes={stats.nodes}, gap={stats.gap:.3g}, {elapsed:.2f}s"
        )
        return result

    def export_mps(
        self, data: Dataset, basis_branch: BasisSet, basis_leaf: BasisSet, hp: HyperParams
    ) -> str:
        """MPS text of the tree MILP, for external solvers."""
        data.require_rows()
        model, _ = build(data, basis_branch, basis_leaf, hp)
        logger.info(f"Exporting MPS: {model.summary()}")
        return write_mps(model)


fit_service = FitService()
