import pandas as pd
import pytest

from app.cli import EXIT_INTERNAL, EXIT_OK, EXIT_USER, cli
from app.learning.dataset import Dataset
from app.learning.tree import SymbolicTree
from app.services.fit_service import FitService

TINY_CONFIG = """
[data]
case = "custom"
path = "train.csv"

[basis]
branch = ["x"]
leaf = ["1", "x"]

[hyperparams]
depth = 1

[solver]
rel_gap = 1e-9
abs_gap = 1e-9
node_limit = 5000
"""


@pytest.fixture
def workspace(tmp_path, tiny_data):
    tiny_data.to_csv(tmp_path / "train.csv")
    (tmp_path / "tiny.toml").write_text(TINY_CONFIG)
    return tmp_path


def test_generate_case1(tmp_path):
    out = tmp_path / "case1.csv"
    assert cli(["generate", "--case", "case1", "--n", "12", "--seed", "3", "--out", str(out)]) == EXIT_OK
    data = Dataset.read_csv(out)
    assert data.n_rows == 12
    assert data.feature_names == ("x1", "x2")


def test_generate_is_reproducible(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        assert cli(["generate", "--case", "viscosity", "--n", "10", "--seed", "1", "--out", str(path)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_generate_two_tank(tmp_path):
    out = tmp_path / "tanks.csv"
    assert cli(["generate", "--case", "two-tank", "--out", str(out)]) == EXIT_OK
    assert len(pd.read_csv(out)) == 81


def test_fit_then_predict(workspace, capsys):
    model = workspace / "model.json"
    code = cli([
        "fit", "--data", str(workspace / "train.csv"),
        "--config", str(workspace / "tiny.toml"), "--out", str(model),
    ])
    assert code == EXIT_OK
    assert "status: optimal" in capsys.readouterr().out
    tree = SymbolicTree.load(model)
    assert tree.variables == ("x",)

    predictions = workspace / "pred.csv"
    code = cli(["predict", "--model", str(model), "--data", str(workspace / "train.csv"), "--out", str(predictions)])
    assert code == EXIT_OK
    frame = pd.read_csv(predictions)
    assert list(frame.columns) == ["x", "y", "prediction", "leaf"]
    assert frame["prediction"].tolist() == pytest.approx(frame["y"].tolist(), abs=1e-6)


def test_fit_export_only(workspace):
    mps = workspace / "model.mps"
    code = cli([
        "fit", "--data", str(workspace / "train.csv"), "--config", str(workspace / "tiny.toml"),
        "--out", str(workspace / "model.json"), "--solver", "export-only", "--mps", str(mps),
    ])
    assert code == EXIT_OK
    assert mps.read_text().startswith("NAME")
    assert not (workspace / "model.json").exists()


def test_export_mps(workspace):
    out = workspace / "tiny.mps"
    code = cli([
        "export-mps", "--data", str(workspace / "train.csv"),
        "--config", str(workspace / "tiny.toml"), "--out", str(out),
    ])
    assert code == EXIT_OK
    assert out.read_text().rstrip().endswith("ENDATA")


def test_predict_on_empty_data(tmp_path, disk_tree, capsys):
    model = tmp_path / "model.json"
    disk_tree.save(model)
    empty = tmp_path / "empty.csv"
    empty.write_text("x1,x2\n")
    code = cli(["predict", "--model", str(model), "--data", str(empty), "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_USER
    assert "error: empty dataset" in capsys.readouterr().err


def test_predict_with_missing_variable(tmp_path, disk_tree):
    model = tmp_path / "model.json"
    disk_tree.save(model)
    data = tmp_path / "data.csv"
    data.write_text("x1\n1.0\n")
    code = cli(["predict", "--model", str(model), "--data", str(data), "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_USER


def test_usage_errors_exit_with_the_user_code():
    assert cli(["fit", "--bogus"]) == EXIT_USER
    assert cli([]) == EXIT_USER


def test_missing_config(tmp_path, capsys):
    code = cli(["fit", "--data", "x.csv", "--config", str(tmp_path / "none.toml"), "--out", "m.json"])
    assert code == EXIT_USER
    assert "config file not found" in capsys.readouterr().err


def test_internal_errors_exit_with_code_two(workspace, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(FitService, "fit", broken)
    code = cli([
        "fit", "--data", str(workspace / "train.csv"),
        "--config", str(workspace / "tiny.toml"), "--out", str(workspace / "model.json"),
    ])
    assert code == EXIT_INTERNAL


FIG3_CONFIG = """
[data]
case = "case1"
n = 10
test_size = 50

[basis]
branch = ["x1^2", "x2^2"]
leaf = ["1", "x1", "x2"]

[hyperparams]
depth = 1
n_branch = 2

[solver]
node_limit = 200

[experiment]
sizes = [10]
seeds = [0]
baselines = ["tree-constant"]
"""


@pytest.mark.parametrize("name", ["fig3", "size-sweep"])
def test_eval_fig3(tmp_path, capsys, name):
    config = tmp_path / "fig3.toml"
    config.write_text(FIG3_CONFIG)
    out = tmp_path / "results"
    code = cli(["eval", "--experiment", name, "--config", str(config), "--out", str(out), "--workers", "1"])
    assert code == EXIT_OK
    assert (out / "fig3.csv").exists()
    assert (out / "fig3_summary.csv").exists()
    assert f"wrote {out / 'fig3.csv'}" in capsys.readouterr().out


def test_eval_unknown_experiment(tmp_path):
    assert cli(["eval", "--experiment", "depth-sweep", "--out", str(tmp_path)]) == EXIT_USER
