import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.optimize import Bounds, LinearConstraint, milp

from app.milp.model import Assignment, Integrality, MilpModel, Sense, SolveStatus
from app.solver.bnb import BranchAndBound, solve_milp
from app.solver.brute import brute_force
from app.solver.config import NodeSelection, SolverConfig
from app.solver.simplex import solve_lp


def _two_variable_lp() -> MilpModel:
    model = MilpModel("lp")
    x = model.add_variable("x", 0, math.inf)
    y = model.add_variable("y", 0, math.inf)
    model.add_constraint([(x, 1), (y, 2)], Sense.LE, 4)
    model.add_constraint([(x, 3), (y, 1)], Sense.LE, 6)
    model.set_objective([(x, -1), (y, -1)])
    return model.freeze()


# =============================================================================
# LP
# =============================================================================

def test_lp_optimum():
    result = solve_lp(_two_variable_lp())
    assert result.status == SolveStatus.OPTIMAL
    assert result.values == pytest.approx([1.6, 1.2], abs=1e-9)
    assert result.objective == pytest.approx(-2.8, abs=1e-9)


def test_lp_infeasible():
    model = MilpModel()
    x = model.add_variable("x", 0, 1)
    model.add_constraint([(x, 1)], Sense.GE, 2)
    model.set_objective([(x, 1)])
    assert solve_lp(model.freeze()).status == SolveStatus.INFEASIBLE


def test_lp_unbounded():
    model = MilpModel()
    x = model.add_variable("x", 0, math.inf)
    y = model.add_variable("y", 0, math.inf)
    model.add_constraint([(x, 1), (y, -1)], Sense.LE, 1)
    model.set_objective([(x, -1)])
    assert solve_lp(model.freeze()).status == SolveStatus.UNBOUNDED


def test_lp_equality_rows():
    model = MilpModel()
    x = model.add_variable("x", -10, 10)
    y = model.add_variable("y", -10, 10)
    model.add_constraint([(x, 1), (y, 1)], Sense.EQ, 3)
    model.add_constraint([(x, 1), (y, -1)], Sense.EQ, 1)
    model.set_objective([(x, 1)])
    result = solve_lp(model.freeze())
    assert result.status == SolveStatus.OPTIMAL
    assert result.values == pytest.approx([2.0, 1.0], abs=1e-9)


def test_lp_bound_overrides():
    model = _two_variable_lp()
    result = solve_lp(model, lower=np.array([0.0, 0.0]), upper=np.array([1.0, math.inf]))
    assert result.status == SolveStatus.OPTIMAL
    assert result.values == pytest.approx([1.0, 1.5], abs=1e-9)


# =============================================================================
# BRANCH AND BOUND
# =============================================================================

def test_knapsack_optimum(knapsack, exact_solver):
    result, stats = solve_milp(knapsack, exact_solver)
    assert result.status == SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(-9.0, abs=1e-9)
    assert np.round(result.values).tolist() == [1.0, 1.0, 0.0]
    assert stats.best_bound <= result.objective + 1e-9
    assert stats.nodes > 1


def test_depth_first_dive_finds_the_same_optimum(knapsack):
    config = SolverConfig(rel_gap=1e-9, abs_gap=1e-9, node_selection=NodeSelection.DEPTH_FIRST_DIVE)
    result, _ = solve_milp(knapsack, config)
    assert result.objective == pytest.approx(-9.0, abs=1e-9)


def test_node_limit_without_incumbent(knapsack):
    result, stats = solve_milp(knapsack, SolverConfig(node_limit=1))
    assert result.status == SolveStatus.LIMIT_REACHED
    assert stats.limit_reached
    assert np.all(np.isnan(result.values))


def test_lp_iteration_limit_is_not_infeasibility(knapsack):
    result, stats = solve_milp(knapsack, SolverConfig(max_lp_iterations=1))
    assert result.status == SolveStatus.LIMIT_REACHED
    assert stats.numerical_failures >= 1
    assert not stats.limit_reached


def test_dropped_root_keeps_the_warm_start_unproven(knapsack):
    warm = Assignment(np.array([1.0, 1.0, 0.0]), -9.0, SolveStatus.FEASIBLE_WITH_GAP)
    result, stats = solve_milp(knapsack, SolverConfig(max_lp_iterations=1), warm_start=warm)
    assert result.status == SolveStatus.FEASIBLE_WITH_GAP
    assert result.objective == -9.0
    assert stats.gap > 0


def test_warm_start_survives_node_limit(knapsack):
    warm = Assignment(np.array([1.0, 1.0, 0.0]), -9.0, SolveStatus.FEASIBLE_WITH_GAP)
    result, stats = solve_milp(knapsack, SolverConfig(node_limit=1), warm_start=warm)
    assert result.status == SolveStatus.FEASIBLE_WITH_GAP
    assert result.objective == -9.0
    assert stats.incumbent == -9.0


def test_infeasible_warm_start_is_ignored(knapsack, exact_solver, caplog):
    warm = Assignment(np.array([1.0, 1.0, 1.0]), -12.0, SolveStatus.FEASIBLE_WITH_GAP)
    search = BranchAndBound(knapsack, exact_solver)
    assert not search.install_warm_start(warm)
    assert "Warm start" in caplog.text
    result, _ = search.run()
    assert result.status == SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(-9.0, abs=1e-9)


def test_infeasible_milp():
    model = MilpModel()
    a = model.add_variable("a", 0, 1, Integrality.BINARY)
    b = model.add_variable("b", 0, 1, Integrality.BINARY)
    model.add_constraint([(a, 2), (b, 2)], Sense.EQ, 1)
    model.set_objective([(a, 1)])
    result, _ = solve_milp(model.freeze())
    assert result.status == SolveStatus.INFEASIBLE


def test_unbounded_milp():
    model = MilpModel()
    a = model.add_variable("a", 0, 1, Integrality.BINARY)
    x = model.add_variable("x", 0, math.inf)
    model.add_constraint([(a, 1), (x, -1)], Sense.LE, 0)
    model.set_objective([(x, -1)])
    result, _ = solve_milp(model.freeze())
    assert result.status == SolveStatus.UNBOUNDED


def test_solver_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(rel_gap=0)
    with pytest.raises(ValidationError):
        SolverConfig(node_limit=0)


def test_brute_force_agrees(knapsack):
    result = brute_force(knapsack)
    assert result.status == SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(-9.0, abs=1e-9)


# =============================================================================
# ORACLE
# =============================================================================

def _random_milp(rng: np.random.Generator, n_bin: int, n_cont: int, n_rows: int):
    n = n_bin + n_cont
    A = np.round(rng.uniform(-3, 5, size=(n_rows, n)), 2)
    rhs = np.round(rng.uniform(1, 10, size=n_rows), 2)
    c = np.round(rng.uniform(-5, 3, size=n), 2)
    upper = np.concatenate([np.ones(n_bin), np.full(n_cont, 4.0)])

    model = MilpModel("random")
    for j in range(n):
        kind = Integrality.BINARY if j < n_bin else Integrality.CONTINUOUS
        model.add_variable(f"v{j}", 0.0, upper[j], kind)
    for i in range(n_rows):
        model.add_constraint([(j, A[i, j]) for j in range(n)], Sense.LE, rhs[i])
    model.set_objective([(j, c[j]) for j in range(n)])
    reference = milp(
        c,
        constraints=LinearConstraint(A, -np.inf, rhs),
        integrality=np.array([1] * n_bin + [0] * n_cont),
        bounds=Bounds(np.zeros(n), upper),
    )
    return model.freeze(), reference


@pytest.mark.parametrize("seed", range(12))
def test_matches_reference_milp_solver(seed, exact_solver):
    # rhs > 0 keeps the origin feasible
    rng = np.random.default_rng(seed)
    sizes = int(rng.integers(2, 9)), int(rng.integers(1, 4)), int(rng.integers(2, 5))
    model, reference = _random_milp(rng, *sizes)
    result, _ = solve_milp(model, exact_solver)
    assert reference.success
    assert result.status == SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(reference.fun, abs=1e-6)
    assert model.is_feasible(result.values)


@pytest.mark.parametrize("seed", range(50))
def test_matches_brute_force(seed, exact_solver):
    rng = np.random.default_rng(100 + seed)
    # up to 12 binaries, 10 continuous variables and 20 rows
    sizes = int(rng.integers(1, 13)), int(rng.integers(0, 11)), int(rng.integers(1, 21))
    model, _ = _random_milp(rng, *sizes)
    result, _ = solve_milp(model, exact_solver)
    oracle = brute_force(model)
    assert result.status == oracle.status == SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(oracle.objective, abs=1e-6)
    assert model.is_feasible(result.values)


@pytest.mark.parametrize("seed", range(3))
def test_repeated_solves_are_identical(seed, exact_solver):
    rng = np.random.default_rng(200 + seed)
    model, _ = _random_milp(rng, 10, 4, 8)
    first, first_stats = solve_milp(model, exact_solver)
    second, second_stats = solve_milp(model, exact_solver)
    assert first.objective == second.objective
    assert first.values.tolist() == second.values.tolist()
    assert first_stats.nodes == second_stats.nodes
    assert first_stats.lp_iterations == second_stats.lp_iterations
