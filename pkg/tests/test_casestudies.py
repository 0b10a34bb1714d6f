import math

import numpy as np
import pytest

from app.casestudies import case1, two_tank, viscosity
from app.casestudies.two_tank import FlowSchedule, simulate_two_tank, two_tank_rhs
from app.core.exceptions import NegativeLevelError, UserError


# =============================================================================
# CASE 1
# =============================================================================

def test_case1_truth():
    assert case1.truth(1.0, 1.0) == 2.0
    assert case1.truth(2.0, 2.0) == 6.0
    assert case1.truth(0.0, 0.0) == 0.0


def test_case1_generator_is_seeded():
    first, second = case1.gen_case1(30, seed=7), case1.gen_case1(30, seed=7)
    assert np.array_equal(first.X, second.X)
    assert np.array_equal(first.y, second.y)
    assert first.X.min() >= -2.0 and first.X.max() <= 2.0
    assert not np.array_equal(first.X, case1.gen_case1(30, seed=8).X)


def test_case1_noise_only_moves_targets():
    clean, noisy = case1.gen_case1(30, seed=1), case1.gen_case1(30, seed=1, noise=0.1)
    assert np.array_equal(clean.X, noisy.X)
    assert not np.array_equal(clean.y, noisy.y)


def test_case1_rejects_bad_sizes():
    with pytest.raises(UserError):
        case1.gen_case1(0)
    with pytest.raises(UserError):
        case1.gen_case1(5, noise=-1.0)


def test_case1_grid():
    grid = case1.grid(10)
    assert grid.n_rows == 100
    assert grid.row(0) == {"x1": -2.0, "x2": -2.0}
    assert grid.row(99) == {"x1": 2.0, "x2": 2.0}


def test_case1_truth_matches_its_basis_form():
    data = case1.gen_case1(50, seed=2)
    basis_branch, basis_leaf = case1.TRUTH.bases()
    phi = basis_leaf.featurize(data.columns(), data.n_rows)
    regimes = case1.TRUTH.regime(data)
    coefficients = np.array(case1.TRUTH.leaves)[regimes]
    assert np.einsum("ik,ik->i", phi, coefficients) == pytest.approx(data.y)
    assert len(basis_branch) == len(case1.TRUTH.split)


# =============================================================================
# TWO TANKS
# =============================================================================

def test_rhs_when_tank_one_is_higher():
    dh1, dh2 = two_tank_rhs(1.5, 0.2, 1.0, 0.0)
    assert dh1 == pytest.approx(1.0 - 0.5 * math.sqrt(1.3), abs=1e-12)
    assert dh1 == pytest.approx(0.42991, abs=1e-5)
    assert dh2 == pytest.approx(0.5 * math.sqrt(1.3) - 0.5 * math.sqrt(0.2), abs=1e-12)


def test_rhs_with_backflow():
    dh1, _ = two_tank_rhs(0.2, 1.5, 0.0, 0.0)
    assert dh1 == pytest.approx(0.5 * math.sqrt(1.3), abs=1e-12)


def test_rhs_at_equal_levels():
    assert two_tank_rhs(0.7, 0.7, 0.3, 0.0)[0] == 0.3


def test_rhs_rejects_negative_levels():
    with pytest.raises(NegativeLevelError):
        two_tank_rhs(-0.1, 0.5, 0.0, 0.0)
    two_tank_rhs(-1e-12, 0.5, 0.0, 0.0)


def test_training_trajectory():
    trajectory = two_tank.training_trajectory()
    assert len(trajectory) == 81
    assert trajectory.t[-1] == pytest.approx(8.0)
    assert tuple(trajectory.states[0]) == two_tank.TRAIN_INITIAL
    difference = trajectory.states[:, 0] - trajectory.states[:, 1]
    assert (difference < 0).any() and (difference > 0).any()
    assert np.all(trajectory.states >= -1e-9)


def test_trajectory_dataset_columns():
    data = two_tank.training_trajectory().dataset("dh1")
    assert data.feature_names == ("h1", "h2", "F1", "F2")
    assert data.n_rows == 81
    with pytest.raises(UserError):
        two_tank.training_trajectory().dataset("dh3")


def test_zero_inflow_from_empty_tanks_stays_empty():
    trajectory = simulate_two_tank((0.0, 0.0), FlowSchedule.constant(0.0, 0.0), t_end=2.0)
    assert np.all(trajectory.states == 0.0)
    assert np.all(trajectory.derivatives == 0.0)


def test_schedule_lookup():
    schedule = two_tank.DEFAULT_SCHEDULE
    assert schedule.at(0.0) == (1.0, 0.3)
    assert schedule.at(1.99) == (1.0, 0.3)
    assert schedule.at(2.0) == (0.2, 1.2)
    assert schedule.at(100.0) == (0.6, 0.9)


@pytest.mark.parametrize("segments", [
    (),
    ((1.0, 0.5, 0.5),),
    ((0.0, 0.5, 0.5), (0.0, 0.1, 0.1)),
    ((0.0, -0.5, 0.5),),
])
def test_schedule_validation(segments):
    with pytest.raises(UserError):
        FlowSchedule(segments)


def test_draining_schedule_raises():
    with pytest.raises(NegativeLevelError):
        simulate_two_tank((0.01, 0.01), FlowSchedule.constant(0.0, 0.0), t_end=50.0, dt=5.0)


def test_rollout_of_the_true_model_reproduces_the_trajectory():
    reference = two_tank.validation_trajectory()
    rolled = two_tank.rollout(two_tank.true_dh1)
    assert np.max(np.abs(rolled.states - reference.states)) < 1e-9


# =============================================================================
# VISCOSITY
# =============================================================================

@pytest.mark.parametrize("log_m, expected", [(3.0, 2.51), (6.0, 9.12)])
def test_log_viscosity_values(log_m, expected):
    assert float(viscosity.log_viscosity(log_m)) == pytest.approx(expected, abs=0.01)


def test_log_viscosity_is_continuous_at_the_critical_weight():
    log_mc = math.log10(viscosity.M_C)
    assert float(viscosity.log_viscosity(log_mc)) == pytest.approx(4.0, abs=1e-9)
    below = float(viscosity.log_viscosity(log_mc - 1e-9))
    assert below == pytest.approx(4.0, abs=1e-6)


def test_viscosity_generator():
    data = viscosity.gen_viscosity(40, seed=0)
    assert data.n_rows == 40
    assert data.feature_names == ("M",)
    assert data.X.min() >= 1e3 and data.X.max() <= 1e6
    again = viscosity.gen_viscosity(40, seed=0)
    assert np.array_equal(data.y, again.y)


def test_viscosity_noise_is_added_in_log_space():
    clean = viscosity.gen_viscosity(40, seed=0)
    noisy = viscosity.gen_viscosity(40, sigma=0.1, seed=0)
    assert np.array_equal(clean.X, noisy.X)
    assert 0.0 < np.std(noisy.y - clean.y) < 0.3


def test_viscosity_rejects_bad_arguments():
    with pytest.raises(UserError):
        viscosity.gen_viscosity(1)
    with pytest.raises(UserError):
        viscosity.gen_viscosity(10, m_c=-1.0)


def test_viscosity_truth_threshold():
    assert viscosity.TRUTH.threshold == pytest.approx(4.494, abs=1e-3)
    low, high = viscosity.intercepts()
    assert high == pytest.approx(-11.28, abs=0.01)
    assert low == pytest.approx(-0.494, abs=1e-3)
