import pytest
from fastapi.testclient import TestClient

from app.core.config import settings
from app.main import app

PREFIX = settings.API_PREFIX

TINY_ROWS = [
    {"x": -1.0, "y": 0.0},
    {"x": -0.5, "y": 0.0},
    {"x": 0.5, "y": 0.5},
    {"x": 1.0, "y": 1.0},
]


@pytest.fixture
def client():
    with TestClient(app) as client:
        yield client


def _fit_request(**changes):
    request = {
        "rows": TINY_ROWS,
        "basis_branch": ["x"],
        "basis_leaf": ["1", "x"],
        "hyperparams": {"depth": 1},
        "solver": {"rel_gap": 1e-9, "abs_gap": 1e-9, "node_limit": 5000},
    }
    request.update(changes)
    return request


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"
    assert client.get("/health/live").json()["status"] == "alive"


def test_readiness_solves_a_small_lp(client):
    body = client.get("/health/ready").json()
    assert body["status"] == "ready"
    assert body["checks"] == {"lp_engine": True}
    assert body["limits"]["max_fit_rows"] == settings.MAX_FIT_ROWS


def test_root(client):
    body = client.get("/").json()
    assert body["service"] == settings.SERVICE_NAME
    assert body["status"] == "running"


def test_fit(client):
    response = client.post(f"{PREFIX}/models/fit", json=_fit_request())
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "optimal"
    assert body["objective"] == pytest.approx(0.0, abs=1e-6)
    assert body["terms"]["l_acc"] == pytest.approx(0.0, abs=1e-6)
    assert " if " in body["equation"]
    assert body["model_size"]["binaries"] > 0
    assert all(body["invariants"].values())
    assert {node["id"] for node in body["tree"]["nodes"]} == {1, 2, 3}


def test_fit_rejects_empty_rows(client):
    response = client.post(f"{PREFIX}/models/fit", json=_fit_request(rows=[]))
    assert response.status_code == 400
    assert response.json()["detail"] == "empty dataset"


def test_fit_rejects_too_many_rows(client, monkeypatch):
    monkeypatch.setattr(settings, "MAX_FIT_ROWS", 3)
    response = client.post(f"{PREFIX}/models/fit", json=_fit_request())
    assert response.status_code == 413


def test_fit_rejects_bad_basis(client):
    response = client.post(f"{PREFIX}/models/fit", json=_fit_request(basis_leaf=["1", "z"]))
    assert response.status_code == 400
    assert "z" in response.json()["detail"]


def test_fit_rejects_invalid_hyperparams(client):
    response = client.post(f"{PREFIX}/models/fit", json=_fit_request(hyperparams={"depth": 0}))
    assert response.status_code == 422


def test_predict(client, disk_tree):
    request = {"tree": disk_tree.serialize(), "rows": [{"x1": 1.0, "x2": 0.5}, {"x1": 2.0, "x2": -1.0}]}
    response = client.post(f"{PREFIX}/models/predict", json=request)
    assert response.status_code == 200
    body = response.json()
    assert body["predictions"] == pytest.approx([1.25, 3.0])
    assert body["leaves"] == [2, 3]


def test_predict_errors(client, disk_tree):
    document = disk_tree.serialize()
    empty = client.post(f"{PREFIX}/models/predict", json={"tree": document, "rows": []})
    assert empty.status_code == 400
    missing = client.post(f"{PREFIX}/models/predict", json={"tree": document, "rows": [{"x1": 1.0}]})
    assert missing.status_code == 400
    assert "x2" in missing.json()["detail"]


def test_mps_export(client):
    response = client.post(f"{PREFIX}/models/mps", json=_fit_request())
    assert response.status_code == 200
    lines = response.text.splitlines()
    assert lines[0].startswith("NAME")
    assert lines[-1] == "ENDATA"
