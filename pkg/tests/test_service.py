"""HTTP service tests via the in-process ASGI client."""

import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from ionlink.service import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestValidate:
    def test_subset_runs_and_passes(self, client):
        resp = client.post("/api/validate", json={"checks": ["appendix_a", "eq_a4"]})
        assert resp.status_code == 200
        body = resp.json()
        assert body["all_passed"] is True
        names = {c["name"] for c in body["checks"]}
        assert "appendix_a_residual" in names
        assert all({"name", "passed", "measured", "tolerance"} <= set(c) for c in body["checks"])

    def test_unknown_suite_is_client_error(self, client):
        resp = client.post("/api/validate", json={"checks": ["nope"]})
        assert resp.status_code == 400

    def test_misconfigured_cutoff_reports_failure(self, client):
        resp = client.post("/api/validate",
                           json={"checks": ["cutoff_convergence"], "fock_cutoff": 1})
        assert resp.status_code == 200
        assert resp.json()["all_passed"] is False


class TestOptimize:
    def test_direct_point(self, client):
        resp = client.post("/api/optimize", json={
            "protocol": "direct",
            "scenario": {"total_distance_km": 100.0, "fidelity_target": 0.99},
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["protocol"] == "direct"
        assert body["result"]["feasible"] is True
        assert body["result"]["fidelity"] >= 0.99
        assert body["result"]["duration_s"] > 0

    def test_hybrid_point(self, client):
        resp = client.post("/api/optimize", json={
            "protocol": "hybrid-repeater",
            "scenario": {"total_distance_km": 300.0, "fidelity_target": 0.9},
            "n_starts": 2,
        })
        assert resp.status_code == 200
        r = resp.json()["result"]
        assert r["feasible"] is True
        assert r["fidelity"] >= 0.9 - 1e-9
        for key in ("alpha1_sq", "beta1_sq", "gamma1_sq", "p_en", "p_s1_left", "p_s2",
                    "p_purify"):
            assert r[key] is not None

    def test_bad_protocol(self, client):
        resp = client.post("/api/optimize", json={"protocol": "quantum-carrier-pigeon"})
        assert resp.status_code == 400

    def test_bad_scenario_field_value(self, client):
        resp = client.post("/api/optimize", json={
            "protocol": "direct",
            "scenario": {"total_distance_km": -5.0},
        })
        assert resp.status_code == 400
        assert "total_distance_km" in resp.json()["detail"]


class TestSweep:
    def test_direct_sweep_rows_ordered(self, client):
        resp = client.post("/api/sweep", json={
            "protocol": "direct",
            "distances_km": [60.0, 120.0, 400.0],
            "scenario": {"fidelity_target": 0.99},
        })
        assert resp.status_code == 200
        rows = resp.json()["rows"]
        assert [r["distance_km"] for r in rows] == [60.0, 120.0, 400.0]
        assert rows[0]["feasible"] is True
        assert rows[0]["duration_s"] < rows[1]["duration_s"]
        assert rows[2]["feasible"] is False
        assert rows[2]["duration_s"] is None

    def test_empty_distances_rejected(self, client):
        resp = client.post("/api/sweep", json={"protocol": "direct", "distances_km": []})
        assert resp.status_code == 400

    def test_decreasing_distances_rejected(self, client):
        resp = client.post("/api/sweep", json={
            "protocol": "direct", "distances_km": [100.0, 50.0]})
        assert resp.status_code == 400
