import math

import pytest

from app.core.exceptions import InvalidHandleError, ModelBuildError
from app.milp.model import Integrality, MilpModel, Sense, sanitize_name
from app.milp.mps import write_mps


def test_handles_are_dense_and_ordered():
    model = MilpModel()
    assert [model.add_variable(f"v{j}", 0, 1) for j in range(3)] == [0, 1, 2]
    assert model.add_constraint([(0, 1.0)], Sense.LE, 1.0) == 0
    assert model.summary() == {"variables": 3, "binaries": 0, "constraints": 1}


def test_inverted_bounds():
    with pytest.raises(ModelBuildError):
        MilpModel().add_variable("x", 2.0, 1.0)


def test_binary_bounds_must_lie_in_unit_interval():
    with pytest.raises(ModelBuildError):
        MilpModel().add_variable("z", 0.0, 2.0, Integrality.BINARY)


def test_invalid_handle():
    model = MilpModel()
    model.add_variable("x", 0, 1)
    with pytest.raises(InvalidHandleError):
        model.add_constraint([(5, 1.0)], Sense.LE, 1.0)
    with pytest.raises(InvalidHandleError):
        model.set_objective([(-1, 1.0)])


def test_names_collide_after_sanitization():
    model = MilpModel()
    model.add_variable("x-1", 0, 1)
    with pytest.raises(ModelBuildError):
        model.add_variable("x_1", 0, 1)


def test_non_finite_rhs():
    model = MilpModel()
    x = model.add_variable("x", 0, 1)
    with pytest.raises(ModelBuildError):
        model.add_constraint([(x, 1.0)], Sense.LE, math.inf)


def test_frozen_model_rejects_changes():
    model = MilpModel()
    model.add_variable("x", 0, 1)
    model.freeze()
    with pytest.raises(ModelBuildError):
        model.add_variable("y", 0, 1)


def test_repeated_handles_are_summed():
    model = MilpModel()
    x = model.add_variable("x", 0, 10)
    model.add_constraint([(x, 1.0), (x, 2.0)], Sense.LE, 6.0)
    assert model.row_coeffs[0] == (3.0,)
    assert model.is_feasible([2.0])
    assert not model.is_feasible([2.5])


def test_violations(knapsack):
    assert knapsack.is_feasible([1.0, 1.0, 0.0])
    kinds = {v.kind for v in knapsack.violations([1.0, 1.0, 1.0])}
    assert kinds == {"row"}
    kinds = {v.kind for v in knapsack.violations([0.5, 0.0, 0.0])}
    assert kinds == {"integrality"}
    kinds = {v.kind for v in knapsack.violations([2.0, 0.0, 0.0])}
    assert "bound" in kinds


def test_objective_value(knapsack):
    assert knapsack.objective_value([1.0, 1.0, 0.0]) == -9.0


def test_sanitize_name():
    assert sanitize_name("z_1-2 (left)") == "z_1_2__left_"
    assert len(sanitize_name("v" * 100)) == 64


# =============================================================================
# MPS
# =============================================================================

def test_mps_sections_in_order(knapsack):
    text = write_mps(knapsack)
    sections = [line for line in text.splitlines() if not line.startswith(" ")]
    assert sections == ["NAME knapsack", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]


def test_mps_binary_markers_and_bounds(knapsack):
    lines = write_mps(knapsack).splitlines()
    assert " MARKER0 'MARKER' 'INTORG'" in lines
    assert " MARKER0 'MARKER' 'INTEND'" in lines
    assert " BV BND a" in lines
    assert " N OBJ" in lines
    assert " L C0_cap1" in lines
    assert " RHS C2_cap3 8" in lines
    assert " a OBJ -5" in lines


def test_mps_bound_kinds():
    model = MilpModel("bounds")
    model.add_variable("free", -math.inf, math.inf)
    model.add_variable("fixed", 2.5, 2.5)
    model.add_variable("boxed", -1.0, 3.0)
    model.add_variable("upper_only", -math.inf, 4.0)
    lines = write_mps(model).splitlines()
    assert " FR BND free" in lines
    assert " FX BND fixed 2.5" in lines
    assert " LO BND boxed -1" in lines and " UP BND boxed 3" in lines
    assert " MI BND upper_only" in lines and " UP BND upper_only 4" in lines


def test_mps_is_deterministic(knapsack):
    assert write_mps(knapsack) == write_mps(knapsack)


def test_mps_rejects_empty_model():
    with pytest.raises(ModelBuildError):
        write_mps(MilpModel())
