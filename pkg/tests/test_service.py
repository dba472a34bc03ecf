import pytest
from fastapi.testclient import TestClient

from sdebayes.market import synthetic_bundle_csv
from sdebayes.service.app import app

SYNTH_KW = dict(
    mask=(True, False, True), xi=(2.0, 1.0, 1.0, 1.0), beta=(1.0, 0.4),
    diffusion=(0.25, 0.8), x0=2.0,
)


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestSimulateEndpoint:
    def test_shapes_and_truth(self, client):
        response = client.post("/simulate", json={"seed": 5, "n_individuals": 2, "n_steps": 120})
        assert response.status_code == 200
        body = response.json()
        assert len(body["paths"]) == 2
        assert len(body["paths"][0]) == 121
        assert len(body["panel"]) == 3
        assert body["truth"]["mask"] == "(1,1,1)"
        assert body["truth"]["sigmas"] == [10.0, 15.0]

    def test_deterministic(self, client):
        payload = {"seed": 8, "n_individuals": 1, "n_steps": 110}
        a = client.post("/simulate", json=payload).json()
        b = client.post("/simulate", json=payload).json()
        assert a == b

    def test_validation_rejects_unknown_field(self, client):
        response = client.post("/simulate", json={"seed": 1, "bogus": 2})
        assert response.status_code == 422
        assert "bogus" in str(response.json()["detail"])


class TestStudiesEndpoint:
    def test_case1_runs(self, client):
        response = client.post(
            "/studies/run",
            json={
                "kind": "case1",
                "seed": 3,
                "overrides": {"n_individuals": 4, "n_steps": 150, "m_draws": 500,
                              "anneal_max_evals": 1000},
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["report"]["study"] == "case1"
        assert len(body["report"]["scores"]) == 7
        assert body["csv"].startswith("mask,score,se")

    def test_invalid_override_named(self, client):
        response = client.post(
            "/studies/run", json={"kind": "case1", "seed": 3, "overrides": {"n_stepz": 100}}
        )
        assert response.status_code == 422
        assert "n_stepz" in str(response.json()["detail"])

    def test_invalid_value_rejected(self, client):
        response = client.post(
            "/studies/run",
            json={"kind": "case1", "seed": 3, "overrides": {"n_steps": 10}},
        )
        assert response.status_code == 400
        assert "n_steps" in response.json()["detail"]


class TestKlEndpoint:
    def test_truth_on_grid(self, client):
        response = client.post(
            "/kl/delta",
            json={
                "seed": 1, "drift0": "constant", "theta0": [1.0, 1.0],
                "drift1": "constant", "grid_min": [1.0, 0.0], "grid_max": [1.0, 2.0],
                "grid_points": [1, 9], "n_steps": 150, "n_paths": 150,
            },
        )
        assert response.status_code == 200
        estimate = response.json()["estimate"]
        assert estimate["delta"] == 0.0
        assert estimate["argmin"] == [1.0, 1.0]

    def test_misspecified_family_positive_delta(self, client):
        response = client.post(
            "/kl/delta",
            json={
                "seed": 2, "drift0": "affine", "theta0": [1.0, 0.0, -1.0],
                "drift1": "constant", "grid_min": [1.0, -2.0], "grid_max": [1.0, 2.0],
                "grid_points": [1, 15], "n_steps": 200, "n_paths": 300, "x0": 1.0,
            },
        )
        estimate = response.json()["estimate"]
        assert estimate["delta"] > 3 * estimate["se_at_argmin"]
        assert len(estimate["argmin"]) == 2

    def test_grid_dimension_checked(self, client):
        response = client.post(
            "/kl/delta",
            json={
                "seed": 1, "drift0": "constant", "theta0": [1.0, 1.0],
                "drift1": "constant", "grid_min": [0.0], "grid_max": [2.0],
                "grid_points": [5],
            },
        )
        assert response.status_code == 400


class TestGirsanovEndpoint:
    def test_identity_passes(self, client):
        theta = [1.0, 0.4, -0.3, 0.7, 0.5, -0.8]
        response = client.post(
            "/diagnostics/girsanov",
            json={"seed": 2, "theta0": theta, "theta1": theta, "n_steps": 150, "n_paths": 400},
        )
        assert response.status_code == 200
        report = response.json()["report"]
        assert report["pass"] is True
        assert report["n_paths"] == 400

    def test_bad_mask_rejected(self, client):
        theta = [1.0, 0.4, -0.3, 0.7, 0.5, -0.8]
        response = client.post(
            "/diagnostics/girsanov",
            json={"seed": 2, "theta0": theta, "theta1": theta, "mask1": "21x"},
        )
        assert response.status_code == 400


class TestMarketEndpoint:
    def test_synthetic_pipeline(self, client):
        prices, covs = synthetic_bundle_csv(seed=4, n_observations=300, **SYNTH_KW)
        response = client.post(
            "/market/run",
            json={
                "seed": 4,
                "companies": [{"company": "acme", "prices_csv": prices}],
                "covariates_csv": covs,
                "m_draws": 1000,
                "anneal_max_evals": 1500,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["reports"][0]["company"] == "acme"
        assert len(body["reports"][0]["family_fits"]) == 4
        assert body["combined_csv"].startswith("company,winner_mask,covariates")

    def test_parse_error_surfaces_as_400(self, client):
        prices, covs = synthetic_bundle_csv(seed=4, n_observations=20, **SYNTH_KW)
        bad = prices.replace("close", "price")
        response = client.post(
            "/market/run",
            json={
                "seed": 4,
                "companies": [{"company": "acme", "prices_csv": bad}],
                "covariates_csv": covs,
            },
        )
        assert response.status_code == 400
        assert "close" in response.json()["detail"]
