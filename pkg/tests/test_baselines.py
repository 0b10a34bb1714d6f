import numpy as np
import pytest

from app.core.exceptions import EmptyDatasetError
from app.learning.baselines import LeafKind, fit_greedy_tree, fit_sparse, warm_start_assignment
from app.learning.dataset import Dataset
from app.learning.formulation import HyperParams, build
from app.milp.model import SolveStatus
from app.symbolic.basis import BasisRole, BasisSet, print_combination


def _line(xs, ys) -> Dataset:
    return Dataset(("x",), np.array(xs, dtype=float).reshape(-1, 1), np.array(ys, dtype=float))


def test_sparse_regression_recovers_a_line():
    xs = np.linspace(-2, 2, 9)
    data = _line(xs, 2 + 3 * xs)
    basis = BasisSet.from_texts(["1", "x", "x^2"], ("x",), BasisRole.LEAF)
    model = fit_sparse(data, basis)
    assert model.coefficients == pytest.approx([2.0, 3.0, 0.0], abs=1e-6)
    assert model.objective == pytest.approx(0.0, abs=1e-9)
    assert model.predict({"x": 10.0}) == pytest.approx(32.0, abs=1e-5)
    assert print_combination(model.coefficients, basis, tol=1e-6) == "2 + 3*x"


def test_sparse_regression_is_robust_to_one_outlier():
    xs = np.linspace(0, 4, 9)
    ys = 1 + xs
    ys[4] += 50.0
    basis = BasisSet.from_texts(["1", "x"], ("x",), BasisRole.LEAF)
    model = fit_sparse(_line(xs, ys), basis)
    assert model.coefficients == pytest.approx([1.0, 1.0], abs=1e-6)


def test_sparse_regression_on_empty_data():
    basis = BasisSet.from_texts(["1"], ("x",), BasisRole.LEAF)
    with pytest.raises(EmptyDatasetError):
        fit_sparse(_line([], []), basis)


def test_greedy_constant_step():
    tree = fit_greedy_tree(_line([0, 1, 2, 3], [0, 0, 1, 1]), depth=1)
    assert tree.nodes[1].threshold == 1.5
    assert tree.predict_many(np.array([[0.5], [2.5]])).tolist() == [0.0, 1.0]
    assert tree.to_text() == "0 if x < 1.5, otherwise 1"


def test_greedy_linear_leaves_fit_absolute_value():
    xs = [-3, -2, -1, 1, 2, 3]
    data = _line(xs, np.abs(xs))
    tree = fit_greedy_tree(data, depth=1, leaf_kind=LeafKind.LINEAR)
    assert tree.nodes[1].threshold == 0.0
    assert tree.predict_many(data) == pytest.approx(data.y, abs=1e-9)


def test_greedy_tree_on_constant_inputs_is_a_single_leaf():
    tree = fit_greedy_tree(_line([1, 1, 1, 1], [0, 1, 2, 3]), depth=2)
    assert tree.branches == []
    assert tree.predict_many(np.array([[1.0]])).tolist() == [1.5]


def test_greedy_tree_respects_depth():
    xs = np.arange(16)
    tree = fit_greedy_tree(_line(xs, xs ** 2), depth=2)
    assert tree.fitted_depth == 2
    assert len(tree.leaves) == 4


def test_warm_start_is_feasible(tiny_data, tiny_bases, tiny_hp):
    model, vmap = build(tiny_data, *tiny_bases, tiny_hp)
    greedy = fit_greedy_tree(tiny_data, depth=1, leaf_kind=LeafKind.LINEAR)
    warm = warm_start_assignment(greedy, tiny_data, tiny_hp, tiny_bases[0], vmap, model)
    assert warm.status == SolveStatus.FEASIBLE_WITH_GAP
    assert model.is_feasible(warm.values)


def test_warm_start_fallback_when_split_feature_is_not_in_the_basis(tiny_data):
    basis_branch = BasisSet.from_texts(["x^3"], ("x",), BasisRole.BRANCHING)
    basis_leaf = BasisSet.from_texts(["1", "x"], ("x",), BasisRole.LEAF)
    hp = HyperParams(depth=1, n_leaf=1)
    model, vmap = build(tiny_data, basis_branch, basis_leaf, hp)
    greedy = fit_greedy_tree(tiny_data, depth=1)
    warm = warm_start_assignment(greedy, tiny_data, hp, basis_branch, vmap, model)
    assert warm.status == SolveStatus.FEASIBLE_WITH_GAP
    assert model.is_feasible(warm.values)
    assert np.all(np.rint(warm.values[vmap.z[:, 2]]) == 1.0)
