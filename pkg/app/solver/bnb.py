"""
Branch-and-Bound.

LP-based branch-and-bound over binary variables. The search dives depth-first
until the first incumbent and then switches to best-bound order (unless
depth-first-dive is configured for the whole search). Nodes are stored as the
list of binaries fixed on the path from the root plus the parent's optimal
basis, which warm-starts the child LP.
"""
import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.milp.model import Assignment, MilpModel, SolveStatus
from app.solver.config import BnbStats, BranchingRule, NodeSelection, SolverConfig
from app.solver.simplex import LpBasis, LpEngine

logger = logging.getLogger(__name__)


@dataclass
class _Node:
    bound: float  # LP objective of the parent
    depth: int
    seq: int
    fixings: Tuple[Tuple[int, float], ...]
    basis: Optional[LpBasis]

    def key(self) -> Tuple[float, int]:
        return (self.bound, self.seq)


class BranchAndBound:
    """One branch-and-bound search over a frozen model."""

    def __init__(self, model: MilpModel, config: Optional[SolverConfig] = None):
        self.model = model
        self.config = config or SolverConfig()
        self.engine = LpEngine(model, self.config)
        form = model.dense()
        self.is_integer = form.is_integer
        self.priority = form.priority
        self.lower = form.lower.copy()
        self.upper = form.upper.copy()
        ints = self.is_integer
        self.lower[ints] = np.ceil(self.lower[ints] - self.config.integrality_tol)
        self.upper[ints] = np.floor(self.upper[ints] + self.config.integrality_tol)
        self.int_idx = np.flatnonzero(ints)

        self.stats = BnbStats(seed=self.config.seed)
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_obj = math.inf
        self._seq = 0
        self._stack: List[_Node] = []
        self._heap: List[Tuple[Tuple[float, int], _Node]] = []
        self._diving = True
        self._pruned_bound = math.inf
        self._lp_limit_drops = 0
        self._log = logger.info if self.config.verbose else logger.debug

    # =========================================================================
    # INCUMBENT
    # =========================================================================

    def install_warm_start(self, warm_start: Assignment) -> bool:
        values = np.asarray(warm_start.values, dtype=float)
        config = self.config
        if values.shape != (self.model.num_variables,) or not self.model.is_feasible(
            values, config.feasibility_tol, config.integrality_tol
        ):
            logger.warning("Warm start is not integer-feasible for this model; ignoring it")
            return False
        self._accept(values, self.model.objective_value(values), source="warm start")
        return True

    def _accept(self, values: np.ndarray, objective: float, source: str) -> None:
        if objective < self.incumbent_obj:
            self.incumbent = values.copy()
            self.incumbent_obj = objective
            self.stats.incumbent = objective
            self._log(
                f"New incumbent {objective:.10g} from {source} "
                f"(nodes={self.stats.nodes}, bound={self.stats.best_bound:.10g})"
            )
            if self._diving and self.config.node_selection == NodeSelection.BEST_BOUND:
                self._end_dive()

    def _threshold(self) -> float:
        if self.incumbent is None:
            return math.inf
        gap = max(self.config.abs_gap, self.config.rel_gap * abs(self.incumbent_obj))
        return self.incumbent_obj - gap

    # =========================================================================
    # OPEN NODES
    # =========================================================================

    def _push(self, node: _Node) -> None:
        if self._diving:
            self._stack.append(node)
        else:
            heapq.heappush(self._heap, (node.key(), node))

    def _pop(self) -> _Node:
        if self._diving:
            return self._stack.pop()
        return heapq.heappop(self._heap)[1]

    def _end_dive(self) -> None:
        self._diving = False
        for node in self._stack:
            heapq.heappush(self._heap, (node.key(), node))
        self._stack = []

    def _open_count(self) -> int:
        return len(self._stack) + len(self._heap)

    def _open_bound(self) -> float:
        bounds = [node.bound for node in self._stack]
        if self._heap:
            bounds.append(self._heap[0][0][0])
        return min(bounds) if bounds else math.inf

    def _update_bound(self) -> None:
        bound = min(self._open_bound(), self._pruned_bound, self.incumbent_obj)
        if bound > self.stats.best_bound:
            self.stats.best_bound = bound

    def _new_node(self, bound: float, depth: int, fixings, basis) -> _Node:
        self._seq += 1
        return _Node(bound, depth, self._seq, fixings, basis)

    # =========================================================================
    # BRANCHING
    # =========================================================================

    def _branch_variable(self, values: np.ndarray) -> Optional[int]:
        """Fractional binary to branch on, or None if the LP point is integral."""
        x = values[self.int_idx]
        frac = np.abs(x - np.round(x))
        mask = frac > self.config.integrality_tol
        if not mask.any():
            return None
        candidates = self.int_idx[mask]
        score = np.minimum(x[mask] - np.floor(x[mask]), np.ceil(x[mask]) - x[mask])
        if self.config.branching == BranchingRule.STRUCTURAL_PRIORITY:
            prio = self.priority[candidates]
            top = prio == prio.max()
            candidates, score = candidates[top], score[top]
        # argmax returns the first maximum; candidates are in VarId order
        return int(candidates[np.argmax(score)])

    # =========================================================================
    # SEARCH
    # =========================================================================

    def _node_bounds(self, fixings) -> Tuple[np.ndarray, np.ndarray]:
        lower = self.lower.copy()
        upper = self.upper.copy()
        for var, value in fixings:
            lower[var] = value
            upper[var] = value
        return lower, upper

    def _limit_hit(self, start: float) -> bool:
        config = self.config
        if config.node_limit is not None and self.stats.nodes >= config.node_limit:
            return True
        if config.time_limit_s is not None and time.perf_counter() - start >= config.time_limit_s:
            return True
        return False

    def _progress(self) -> None:
        self._log(
            f"nodes={self.stats.nodes} open={self._open_count()} "
            f"bound={self.stats.best_bound:.10g} incumbent={self.incumbent_obj:.10g} "
            f"gap={self._gap():.3g}"
        )

    def _gap(self) -> float:
        if self.incumbent is None:
            return math.inf
        return max(0.0, self.incumbent_obj - self.stats.best_bound)

    def run(self) -> Tuple[Assignment, BnbStats]:
        start = time.perf_counter()
        config = self.config
        n_vars = self.model.num_variables
        root_status: Optional[SolveStatus] = None

        self._push(self._new_node(-math.inf, 0, (), None))
        while self._open_count():
            if self._limit_hit(start):
                self.stats.limit_reached = True
                break
            node = self._pop()
            if node.bound >= self._threshold():
                self._pruned_bound = min(self._pruned_bound, node.bound)
                self._update_bound()
                continue

            lower, upper = self._node_bounds(node.fixings)
            result = self.engine.solve(lower, upper, node.basis)
            lp = result.assignment
            self.stats.nodes += 1
            self.stats.lp_iterations += lp.iterations
            if root_status is None:
                root_status = lp.status

            if lp.status == SolveStatus.UNBOUNDED and node.depth == 0:
                break
            if lp.status in (SolveStatus.NUMERICAL_FAILURE, SolveStatus.LIMIT_REACHED):
                self.stats.numerical_failures += 1
                self._pruned_bound = min(self._pruned_bound, node.bound)
                if lp.status == SolveStatus.LIMIT_REACHED:
                    self._lp_limit_drops += 1
                logger.warning(f"Node {node.seq} LP ended with {lp.status.value}; node dropped")
            elif lp.status == SolveStatus.OPTIMAL:
                self._process(node, lp, result.basis)

            self._update_bound()
            if self.stats.nodes % config.log_every == 0:
                self._progress()

        return self._finish(start, root_status, n_vars)

    def _process(self, node: _Node, lp: Assignment, basis: Optional[LpBasis]) -> None:
        bound = max(lp.objective, node.bound)
        if bound >= self._threshold():
            self._pruned_bound = min(self._pruned_bound, bound)
            return
        var = self._branch_variable(lp.values)
        if var is None:
            if self.model.is_feasible(
                lp.values, self.config.feasibility_tol, self.config.integrality_tol
            ):
                self._accept(lp.values, lp.objective, source=f"node {node.seq}")
            else:
                self.stats.numerical_failures += 1
                self._pruned_bound = min(self._pruned_bound, bound)
                logger.warning(f"Integral LP point at node {node.seq} failed the feasibility check")
            return
        value = lp.values[var]
        down = self._new_node(bound, node.depth + 1, node.fixings + ((var, 0.0),), basis)
        up = self._new_node(bound, node.depth + 1, node.fixings + ((var, 1.0),), basis)
        # the child nearer the LP value is explored first
        nearer, farther = (up, down) if value >= 0.5 else (down, up)
        if self._diving:
            self._push(farther)
            self._push(nearer)
        else:
            nearer.seq, farther.seq = min(nearer.seq, farther.seq), max(nearer.seq, farther.seq)
            self._push(nearer)
            self._push(farther)

    def _finish(self, start: float, root_status: Optional[SolveStatus], n_vars: int):
        stats = self.stats
        stats.open_nodes = self._open_count()
        stats.wall_time_s = time.perf_counter() - start
        if not stats.limit_reached:
            # search exhausted: the bound is the incumbent or the best pruned subtree
            stats.best_bound = max(stats.best_bound, min(self._pruned_bound, self.incumbent_obj))
        if self.incumbent is not None:
            stats.best_bound = min(stats.best_bound, self.incumbent_obj)
        stats.gap = self._gap()

        if root_status == SolveStatus.UNBOUNDED and self.incumbent is None:
            status = SolveStatus.UNBOUNDED
        elif self.incumbent is not None:
            tolerance = max(self.config.abs_gap, self.config.rel_gap * abs(self.incumbent_obj))
            proven = not stats.limit_reached and stats.gap <= tolerance
            status = SolveStatus.OPTIMAL if proven else SolveStatus.FEASIBLE_WITH_GAP
        elif stats.limit_reached or self._lp_limit_drops:
            status = SolveStatus.LIMIT_REACHED
        elif stats.numerical_failures:
            # dropped nodes leave infeasibility unproven
            status = SolveStatus.NUMERICAL_FAILURE
        else:
            status = SolveStatus.INFEASIBLE

        self._progress()
        self._log(
            f"Branch-and-bound finished: {status.value}, {stats.nodes} nodes, "
            f"{stats.lp_iterations} LP iterations, {stats.wall_time_s:.2f}s"
        )
        if self.incumbent is None:
            return Assignment.without_solution(status, n_vars, stats.lp_iterations), stats
        return Assignment(self.incumbent.copy(), self.incumbent_obj, status, stats.lp_iterations), stats


def solve_milp(
    model: MilpModel,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[Assignment] = None,
) -> Tuple[Assignment, BnbStats]:
    """
    Solve a MILP to proven optimality within the configured gap.

    Args:
        model: The model to solve
        config: Solver configuration (defaults when omitted)
        warm_start: Integer-feasible assignment installed as the first
            incumbent; ignored with a warning when it fails the check

    Returns:
        (assignment, stats). Status optimal means
        incumbent - best_bound <= max(abs_gap, rel_gap * |incumbent|).
    """
    search = BranchAndBound(model, config)
    if warm_start is not None:
        search.install_warm_start(warm_start)
    return search.run()
