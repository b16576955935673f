import numpy as np
import pytest
from fastapi.testclient import TestClient

from crossover_design.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


PROBLEM_TABLE1 = {
    "t": 2,
    "p": 2,
    "sequences": ["AB", "BA"],
    "family": "binary",
    "theta": [0.5, -1.0, 4.0, -2.0],
    "correlation": {"kind": "compound_symmetric", "rho": 0.1},
}


class TestHealthAndFixtures:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_fixture_listing(self, client):
        rows = client.get("/fixtures").json()
        names = {row["name"] for row in rows}
        assert "table1-theta1" in names
        assert "latin-square-theta2" in names
        entry = next(r for r in rows if r["name"] == "table1-theta1")
        assert entry["sequences"] == ["AB", "BA"]
        assert entry["theta"] == [0.5, -1.0, 4.0, -2.0]


class TestOptimizeEndpoint:
    def test_explicit_problem(self, client):
        resp = client.post("/optimize", json={"problem": PROBLEM_TABLE1,
                                              "optimizer": {"restarts": 3}})
        assert resp.status_code == 200
        body = resp.json()
        weights = {pt["sequence"]: pt["weight"] for pt in body["design"]}
        assert weights["AB"] == pytest.approx(0.1770, abs=2e-3)
        assert body["converged"] is True

    def test_fixture_with_structure(self, client):
        resp = client.post("/optimize", json={
            "fixture": {"name": "table1-theta2", "structure": 4},
            "optimizer": {"restarts": 2},
        })
        assert resp.status_code == 200
        weights = {pt["sequence"]: pt["weight"] for pt in resp.json()["design"]}
        assert weights["AB"] == pytest.approx(0.5070, abs=2e-3)

    def test_sandwich_via_true_correlation(self, client):
        problem = dict(PROBLEM_TABLE1)
        problem["true_correlation"] = {"kind": "ar1", "rho": 0.4}
        resp = client.post("/optimize", json={"problem": problem,
                                              "optimizer": {"restarts": 2}})
        assert resp.status_code == 200

    def test_both_problem_and_fixture_rejected(self, client):
        resp = client.post("/optimize", json={
            "problem": PROBLEM_TABLE1,
            "fixture": {"name": "table1-theta1"},
        })
        assert resp.status_code == 400
        assert resp.json()["error"] == "ConfigError"

    def test_theta_length_rejected_with_path(self, client):
        problem = dict(PROBLEM_TABLE1, theta=[0.5, -1.0, 4.0])
        resp = client.post("/optimize", json={"problem": problem})
        assert resp.status_code == 400
        assert "problem.theta" in resp.json()["detail"]

    def test_unknown_field_rejected_by_schema(self, client):
        resp = client.post("/optimize", json={"problem": PROBLEM_TABLE1, "bogus": 1})
        assert resp.status_code == 422  # pydantic validation

    def test_numerical_failure_maps_to_422(self, client):
        # AB/AA never exercises the carryover of B, so that column is zero
        # and the information matrix is singular at every design
        problem = {
            "t": 2, "p": 2, "sequences": ["AB", "AA"], "family": "binary",
            "theta": [0.5, -1.0, 4.0, -2.0],
            "correlation": {"kind": "ar1", "rho": 0.1},
        }
        resp = client.post("/optimize", json={"problem": problem,
                                              "optimizer": {"restarts": 2}})
        assert resp.status_code == 422
        assert resp.json()["error"] == "SingularInformation"


class TestEfficiencyEndpoint:
    def test_same_theta_gives_unity(self, client):
        resp = client.post("/efficiency", json={
            "fixture": {"name": "latin-square-theta2", "structure": 2},
            "assumed_theta": [0.5, 0.06, -0.53, -0.6, -0.35, 0.025, -0.23, 0.73, 0.23, 0.30],
            "optimizer": {"restarts": 2},
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["sensitivity"] == pytest.approx(0.0, abs=1e-9)
        assert body["relative_d_efficiency"] == pytest.approx(1.0, abs=1e-6)

    def test_assumed_correlation_sandwich(self, client):
        resp = client.post("/efficiency", json={
            "fixture": {"name": "latin-square-theta1", "structure": 1},
            "assumed_correlation": {"kind": "ar1", "rho": 0.2},
            "optimizer": {"restarts": 2},
        })
        assert resp.status_code == 200
        assert resp.json()["relative_d_efficiency"] == pytest.approx(0.9999, abs=5e-4)

    def test_requires_an_assumption(self, client):
        resp = client.post("/efficiency", json={
            "fixture": {"name": "latin-square-theta1"},
        })
        assert resp.status_code == 400


class TestMisspecEndpoint:
    def test_defaults_run_subset(self, client):
        resp = client.post("/misspec-table", json={
            "structures": [1, 2],
            "optimizer": {"restarts": 2},
        })
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["rows"]) == 2
        for row in body["rows"]:
            assert row["efficiency_theta1"] >= 0.998
            assert row["efficiency_theta2"] >= 0.998


class TestSimulateEndpoint:
    def test_small_run(self, client):
        resp = client.post("/simulate", json={
            "fixture": {"name": "latin-square-theta2", "structure": 2, "rho": 0.3},
            "n_total": 80,
            "replications": 3,
            "seed": 11,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["n_replications"] == 3
        assert len(body["replications"]) == 3
        assert body["mse_uniform"] > 0

    def test_identical_seed_identical_report(self, client):
        payload = {
            "fixture": {"name": "latin-square-theta2", "structure": 2, "rho": 0.3},
            "n_total": 80, "replications": 2, "seed": 3,
        }
        a = client.post("/simulate", json=payload).json()
        b = client.post("/simulate", json=payload).json()
        assert a == b


class TestDumpEndpoint:
    def test_latin_square_walkthrough_shapes(self, client):
        resp = client.post("/dump-matrices", json={
            "fixture": {"name": "latin-square-theta2", "structure": 1, "rho": 0.2},
        })
        assert resp.status_code == 200
        body = resp.json()
        assert [s["sequence"] for s in body["sequences"]] == ["ABCD", "BDAC", "CADB", "DCBA"]
        first = body["sequences"][0]
        assert np.array(first["x"]).shape == (4, 10)
        assert np.array(first["x_full_indicator"]).shape == (4, 13)
        assert np.array(first["w_inverse"]).shape == (4, 4)
        assert np.array(first["dmu_dtheta"]).shape == (4, 10)
        assert len(first["eta"]) == 4
        # W inverse magnitudes sit in the documented qualitative band
        w_inv = np.array(first["w_inverse"])
        assert np.all(np.diag(w_inv) > 4.0) and np.all(np.diag(w_inv) < 6.5)

    def test_mu_consistent_with_eta(self, client):
        resp = client.post("/dump-matrices", json={
            "fixture": {"name": "table1-theta1"},
        })
        body = resp.json()
        for dump in body["sequences"]:
            mu = 1.0 / (1.0 + np.exp(-np.array(dump["eta"])))
            np.testing.assert_allclose(dump["mu"], mu, atol=1e-9)
