import pandas as pd
import pytest

from app.core.exceptions import ConfigError
from app.schemas.experiment import ExperimentConfig, PRESETS
from app.schemas.report import SYMBOLIC_TREE, MethodMetrics, MetricsReport
from app.services.experiment_service import (
    ExperimentService,
    _summary_fig3,
    _summary_nb_sweep,
    canonical_experiment,
)


@pytest.fixture
def small_viscosity() -> ExperimentConfig:
    document = {
        **PRESETS["viscosity"],
        "solver": {"node_limit": 200},
        "experiment": {"viscosity_sizes": [12], "baselines": ["sparse", "tree-constant"]},
    }
    document["data"] = {**document["data"], "test_size": 50}
    return ExperimentConfig.from_mapping(document)


def test_viscosity_cell_reports_every_method(small_viscosity):
    service = ExperimentService.for_experiment("viscosity", small_viscosity, workers=1)
    result = service.run("viscosity")
    assert result.case == "viscosity"
    assert len(result.reports) == 1
    methods = [m.method for m in result.reports[0].methods]
    assert methods == [SYMBOLIC_TREE, "sparse", "tree-constant"]
    assert set(result.table["n"]) == {12}
    assert result.table["test_mae"].notna().all()


def test_written_series_leave_out_wall_time(small_viscosity, tmp_path):
    service = ExperimentService.for_experiment("viscosity", small_viscosity, workers=1)
    paths = service.write(service.run("viscosity"), tmp_path)
    assert [p.name for p in paths] == ["viscosity.csv", "viscosity_summary.csv"]
    table = pd.read_csv(paths[0])
    assert "wall_time_s" not in table.columns
    assert "test_mae" in table.columns


def test_report_rows_flatten_coefficients():
    report = MetricsReport(experiment="fig3", case="case1", cell={"size": 20, "seed": 1})
    report.methods.append(MethodMetrics(
        method=SYMBOLIC_TREE, test_mae=0.5, coefficients={"regime0:x1^2": 1.0},
        invariants={"routing_consistency": True, "document_round_trip": False},
    ))
    (row,) = report.rows()
    assert row["size"] == 20 and row["seed"] == 1
    assert row["coef[regime0:x1^2]"] == 1.0
    assert row["invariants_ok"] is False
    assert "coefficients" not in row


def _fig3_table(scores):
    rows = [
        {"size": size, "seed": 0, "method": method, "test_mae": mae}
        for size, by_method in scores.items()
        for method, mae in by_method.items()
    ]
    return pd.DataFrame(rows)


RANKED = {SYMBOLIC_TREE: 0.01, "sparse": 0.2, "tree-linear": 0.3, "tree-constant": 0.5}


def test_fig3_summary_accepts_the_expected_ranking():
    table = _fig3_table({20: RANKED, 40: {**RANKED, SYMBOLIC_TREE: 0.005}})
    summary, flags = _summary_fig3(table, [])
    assert flags == []
    assert set(summary["size"]) == {20, 40}


def test_fig3_summary_flags_every_broken_pair():
    swapped = {**RANKED, "sparse": 0.35}
    _, flags = _summary_fig3(_fig3_table({20: swapped}), [])
    assert flags == ["fig3 size=20: sparse MAE 0.35 is not below tree-linear MAE 0.3"]


def test_fig3_summary_checks_adjacent_sizes():
    table = _fig3_table({
        20: RANKED,
        40: {**RANKED, SYMBOLIC_TREE: 0.02},
        60: {**RANKED, SYMBOLIC_TREE: 0.001},
    })
    _, flags = _summary_fig3(table, [])
    assert flags == ["fig3: symbolic tree MAE grows from size 20 to 40"]


def test_nb_sweep_summary_flags_a_misplaced_minimum():
    table = pd.DataFrame({
        "n_branch": [1, 2, 3],
        "method": [SYMBOLIC_TREE] * 3,
        "test_mae": [0.4, 0.1, 0.05],
        "train_mae": [0.3, 0.0, 0.0],
        "status": ["optimal"] * 3,
        "nodes": [10, 20, 30],
    })
    _, flags = _summary_nb_sweep(table, [])
    assert flags == ["nb-sweep: lowest test MAE at N_B=3, expected N_B=2"]


def test_size_sweep_alias_runs_fig3():
    assert canonical_experiment("size-sweep") == "fig3"
    assert canonical_experiment("fig3") == "fig3"
    with pytest.raises(ConfigError):
        canonical_experiment("depth-sweep")
