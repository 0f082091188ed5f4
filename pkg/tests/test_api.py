import time

import pytest
from fastapi.testclient import TestClient

from app.main import app
from tests.conftest import PAPER_EXPRESSION, PAPER_GENE

SMALL_RUN = {"methods": ["cmaes-neep"], "benchmarks": ["Nguyen6"], "trials": 2, "pop_size": 6, "generations": 2}


@pytest.fixture
def client(single_worker_settings):
    with TestClient(app) as test_client:
        yield test_client


def _wait_for(client, run_id, timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        body = client.get(f"/api/v1/runs/{run_id}").json()
        if body["status"] in ("completed", "failed"):
            return body
        time.sleep(0.05)
    raise AssertionError(f"run {run_id} did not finish")


def test_root_and_health(client):
    assert client.get("/").json()["service"] == "NEEP API"
    health = client.get("/api/v1/health").json()
    assert health["status"] == "healthy"
    assert health["benchmarks"] == 16


def test_benchmarks(client):
    assert len(client.get("/api/v1/benchmarks").json()) == 16
    nico = client.get("/api/v1/benchmarks", params={"name_filter": "nico"}).json()
    assert [b["name"] for b in nico] == ["Nico9", "Nico14", "Nico16", "Nico20"]
    concrete = client.get("/api/v1/benchmarks", params={"name_filter": "Concrete"}).json()[0]
    assert concrete["csv_backed"] is True
    assert concrete["train_sampler"] == "csv"


def test_decode(client):
    response = client.post("/api/v1/decode", json={"gene": PAPER_GENE})
    assert response.status_code == 200
    assert response.json() == {
        "expression": PAPER_EXPRESSION, "effective_length": 11, "head_len": 8, "length": 17,
    }


def test_decode_errors(client):
    assert client.post("/api/v1/decode", json={"gene": "+ x $"}).status_code == 400
    assert client.post("/api/v1/decode", json={"gene": "+ x x x"}).status_code == 400


def test_run_lifecycle(client):
    response = client.post("/api/v1/runs", json=SMALL_RUN)
    assert response.status_code == 202
    run_id = response.json()["run_id"]
    assert run_id.startswith("run_")

    body = _wait_for(client, run_id)
    assert body["status"] == "completed"
    assert [row["benchmark"] for row in body["summary"]] == ["Nguyen6"]
    assert body["summary"][0]["trials"] == 2

    progress = client.get("/api/v1/logs/progress", params={"limit": 4}).json()
    assert progress["total"] == 4
    assert all(record["method"] == "CMAES-NEEP" for record in progress["records"])


def test_run_with_unknown_benchmark(client):
    response = client.post("/api/v1/runs", json={**SMALL_RUN, "benchmarks": ["Ngyuen6"]})
    assert response.status_code == 400
    assert "Nguyen6" in response.json()["detail"]


def test_run_with_failing_cell(client):
    response = client.post("/api/v1/runs", json={**SMALL_RUN, "benchmarks": ["Nguyen6", "Energy"]})
    body = _wait_for(client, response.json()["run_id"])
    assert body["status"] == "completed"
    assert [f["benchmark"] for f in body["failures"]] == ["Energy"]


def test_unknown_run(client):
    assert client.get("/api/v1/runs/run_missing").status_code == 404
