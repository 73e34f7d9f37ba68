"""HTTP facade: endpoint behaviour, validation, error mapping."""

import pytest
from fastapi.testclient import TestClient

from kinetic_mlmc.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_level_study_endpoint(client):
    r = client.post(
        "/level-study",
        json={
            "epsilon": 0.5,
            "t_star": 1.0,
            "dt0": 0.5,
            "max_levels": 3,
            "samples_per_level": 500,
            "seed": 5,
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["epsilon"] == 0.5
    assert [row["level"] for row in body["rows"]] == [0, 1, 2]
    assert all(row["n_samples"] == 500 for row in body["rows"])
    # workers is an execution knob, not part of the result identity
    assert "workers" not in body


def test_level_study_worker_count_does_not_change_response(client):
    payload = {
        "epsilon": 0.5,
        "t_star": 1.0,
        "dt0": 0.5,
        "max_levels": 3,
        "samples_per_level": 2000,
        "seed": 5,
    }
    r1 = client.post("/level-study", json=payload)
    r8 = client.post("/level-study", json={**payload, "workers": 8})
    assert r1.status_code == r8.status_code == 200
    assert r1.content == r8.content


def test_mlmc_run_endpoint(client):
    r = client.post(
        "/mlmc-run", json={"epsilon": 10.0, "t_star": 0.5, "rmse": 0.5, "seed": 1}
    )
    assert r.status_code == 200
    body = r.json()
    assert body["converged"] is True
    assert body["total_cost"] == 880.0
    assert len(body["rows"]) == 4
    assert body["variance_budget"] == 0.125
    assert body["classical"]["samples"] >= 1
    assert body["strategy"] == "geometric"


def test_compare_classical_endpoint(client):
    r = client.post(
        "/compare-classical",
        json={"epsilon": 10.0, "t_star": 0.5, "rmse": 0.5, "seed": 1},
    )
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {
        "rmse",
        "mlmc_cost",
        "classical_cost",
        "classical_samples",
        "speedup",
    }
    assert body["mlmc_cost"] == 880.0
    assert body["speedup"] == pytest.approx(body["classical_cost"] / body["mlmc_cost"])


def test_trajectory_endpoint(client):
    r = client.post("/trajectory", json={"epsilon": 0.5, "t_star": 4.0, "seed": 3})
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert len(rows) == 21
    assert rows[0]["t"] == 0.0
    assert {row["sign_fine"] for row in rows} <= {-1, 1}


def test_trajectory_modes(client):
    for mode in ("full", "diffusion-only", "transport-only"):
        r = client.post(
            "/trajectory", json={"epsilon": 0.5, "t_star": 2.0, "mode": mode}
        )
        assert r.status_code == 200
        assert r.json()["mode"] == mode


def test_unknown_field_is_rejected(client):
    r = client.post(
        "/mlmc-run",
        json={"epsilon": 0.5, "rmse": 0.5, "bogus_knob": 3},
    )
    assert r.status_code == 422


def test_missing_required_field_is_rejected(client):
    r = client.post("/mlmc-run", json={"rmse": 0.5})
    assert r.status_code == 422
    r = client.post("/level-study", json={})
    assert r.status_code == 422


def test_bad_literal_is_rejected(client):
    r = client.post(
        "/trajectory", json={"epsilon": 0.5, "mode": "sideways"}
    )
    assert r.status_code == 422


def test_domain_config_error_maps_to_422(client):
    # Passes schema validation (dt0 > 0) but fails the domain rule that dt0
    # divides t_star.
    r = client.post(
        "/level-study",
        json={"epsilon": 0.5, "t_star": 1.0, "dt0": 0.3, "samples_per_level": 10},
    )
    assert r.status_code == 422
    body = r.json()
    assert body["kind"] == "config"
    assert "dt0" in body["detail"]


def test_budget_error_maps_to_400(client):
    r = client.post(
        "/level-study",
        json={
            "epsilon": 0.5,
            "t_star": 1.0,
            "dt0": 0.5,
            "samples_per_level": 2000,
            "cost_ceiling": 10.0,
        },
    )
    assert r.status_code == 400
    body = r.json()
    assert body["kind"] == "budget"
    assert "ceiling" in body["detail"]


def test_mlmc_budget_error_maps_to_400(client):
    r = client.post(
        "/mlmc-run",
        json={"epsilon": 0.1, "t_star": 0.5, "rmse": 0.01, "cost_ceiling": 5.0},
    )
    assert r.status_code == 400
    assert r.json()["kind"] == "budget"


def test_trajectory_step_mismatch_maps_to_422(client):
    r = client.post(
        "/trajectory",
        json={"epsilon": 0.5, "dt_fine": 0.3, "dt_coarse": 1.0},
    )
    assert r.status_code == 422
    assert r.json()["kind"] == "config"
