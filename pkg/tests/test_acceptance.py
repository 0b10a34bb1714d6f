"""Desk-scale recovery runs on the three case studies (run with -m slow)."""
import numpy as np
import pytest

from app.casestudies import case1, two_tank, viscosity
from app.learning.baselines import fit_sparse
from app.schemas.experiment import PRESETS, ExperimentConfig
from app.schemas.report import SYMBOLIC_TREE
from app.services import metrics
from app.services.experiment_service import ExperimentService
from app.services.fit_service import FitService

pytestmark = pytest.mark.slow


def _fit(config: ExperimentConfig, data):
    basis_branch, basis_leaf = config.bases()
    result = FitService().fit(data, basis_branch, basis_leaf, config.hyperparams, config.solver)
    assert result.tree is not None
    assert all(result.invariants_ok.values()), result.invariants_ok
    return result


def _by_regime(tree, data, truth):
    matching = metrics.match_leaves(tree, data, truth.regime(data))
    return matching, {regime: tree.leaf(n) for n, regime in matching.items()}


def test_case1_recovers_both_regimes():
    config = ExperimentConfig.preset("case1")
    data = case1.gen_case1(40, seed=0)
    result = _fit(config, data)
    assert result.solution.terms.l_acc <= 1e-6

    matching, leaves = _by_regime(result.tree, data, case1.TRUTH)
    for regime, coefficients in leaves.items():
        assert coefficients == pytest.approx(case1.TRUTH.leaves[regime], abs=1e-3)

    test = case1.gen_case1(2000, seed=12345)
    learned = np.array([matching[int(n)] for n in result.tree.predict_leaves_many(test)])
    assert np.mean(learned == case1.TRUTH.regime(test)) >= 0.97


def _crossover(tree) -> float:
    log_m = np.linspace(3.0, 6.0, 30001)
    leaves = tree.predict_leaves_many({"M": 10.0 ** log_m})
    switches = np.flatnonzero(np.diff(leaves))
    assert len(switches) == 1
    return float(log_m[switches[0] + 1])


@pytest.mark.parametrize("n, window", [(40, (4.1, 4.55)), (100, (4.35, 4.55))])
def test_viscosity_slopes_and_crossover(n, window):
    config = ExperimentConfig.preset("viscosity")
    data = viscosity.gen_viscosity(n, seed=0)
    result = _fit(config, data)
    assert window[0] <= _crossover(result.tree) <= window[1]

    _, leaves = _by_regime(result.tree, data, viscosity.TRUTH)
    low, high = viscosity.intercepts()
    assert leaves[0][1] == pytest.approx(1.0, abs=0.05)
    assert leaves[1][1] == pytest.approx(3.4, abs=0.05)
    assert leaves[0][0] == pytest.approx(low, abs=0.1)
    assert leaves[1][0] == pytest.approx(high, abs=0.1)


def test_two_tank_recovers_the_coupling_law():
    config = ExperimentConfig.preset("two-tank")
    data = two_tank.training_trajectory().dataset("dh1")
    result = _fit(config, data)

    _, leaves = _by_regime(result.tree, data, two_tank.TRUTH)
    for regime, coefficients in leaves.items():
        assert coefficients[1:] == pytest.approx(two_tank.TRUTH.leaves[regime][1:], abs=0.02)
    a, b = metrics.oriented_root_split(result.tree, metrics.match_leaves(result.tree, data, two_tank.TRUTH.regime(data)))
    assert abs(a[0]) == pytest.approx(1.0)
    assert abs(b) <= 0.05

    reference = two_tank.validation_trajectory()
    symbolic = metrics.rollout_rmse(metrics.tree_dh1_model(result.tree), reference)
    assert symbolic <= 1e-2

    _, basis_leaf = config.bases()
    sparse = fit_sparse(data, basis_leaf, config.solver)

    def sparse_dh1(h1, h2, f1, f2):
        return sparse.predict({"h1": h1, "h2": h2, "F1": f1, "F2": f2})

    assert metrics.rollout_rmse(sparse_dh1, reference) >= 100 * max(symbolic, 1e-12)


# =============================================================================
# EXPERIMENT PROPERTIES
# =============================================================================

def _experiment_config(case: str, **experiment) -> ExperimentConfig:
    document = dict(PRESETS[case])
    document["data"] = {**document["data"], "test_size": 500}
    document["experiment"] = experiment
    return ExperimentConfig.from_mapping(document)


def test_fig3_ranks_the_methods_at_every_size():
    config = _experiment_config("case1", sizes=[20, 40], seeds=[0])
    result = ExperimentService.for_experiment("fig3", config, workers=1).run_fig3()
    assert [flag for flag in result.flags if flag.startswith("fig3")] == []
    ours = result.summary[result.summary["method"] == SYMBOLIC_TREE]["test_mae"].tolist()
    assert ours[1] <= ours[0] + 1e-9


def test_nb_sweep_is_best_with_two_split_features():
    config = _experiment_config("case1", nb_values=[1, 2, 3])
    result = ExperimentService.for_experiment("nb-sweep", config, workers=1).run_nb_sweep()
    scores = result.summary.set_index("n_branch")["test_mae"]
    assert int(scores.idxmin()) == 2
    assert scores[1] > scores[2]


def test_noise_degrades_coefficients_but_keeps_the_form():
    config = _experiment_config("viscosity", noise_levels=[0.0, 0.4], noise_seeds=3)
    result = ExperimentService.for_experiment("noise", config, workers=1).run_noise()
    summary = result.summary.set_index("sigma")
    assert summary.loc[0.4, "leaf_l2_mean"] >= summary.loc[0.0, "leaf_l2_mean"]
    assert summary.loc[0.0, "form_preserved"] == 3
