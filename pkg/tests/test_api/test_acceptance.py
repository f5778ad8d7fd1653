from fastapi.testclient import TestClient


class TestAcceptanceEndpoint:
    def test_dimensions_suite(self, client: TestClient):
        """Test POST /api/v1/acceptance/dimensions - effectif réduit."""
        response = client.post("/api/v1/acceptance/dimensions", json={"trials": 6, "seed": 3})

        assert response.status_code == 200
        data = response.json()
        assert data["suite"] == "dimensions"
        assert data["trials"] == 6
        assert data["verdict"] == "pass"
        assert all(criterion["verdict"] == "pass" for criterion in data["criteria"])

    def test_default_trial_count_is_small(self, client: TestClient):
        response = client.post("/api/v1/acceptance/soa-mistake-bound", json={"rounds": 10})
        assert response.status_code == 200
        assert response.json()["trials"] == 10

    def test_unknown_suite(self, client: TestClient):
        response = client.post("/api/v1/acceptance/nope", json={})
        assert response.status_code == 422

    def test_unknown_config_field(self, client: TestClient):
        response = client.post("/api/v1/acceptance/dimensions", json={"trails": 3})
        assert response.status_code == 422

    def test_file_sources_rejected(self, client: TestClient):
        response = client.post("/api/v1/acceptance/cyclerobust", json={"trials": 1, "class_file": "h.txt"})
        assert response.status_code == 422

    def test_scale_cap_is_a_bad_request(self, client: TestClient):
        """Un scénario au-delà de max_instances remonte en 400 via le handler global."""
        response = client.post("/api/v1/acceptance/cyclerobust", json={
            "trials": 1,
            "scenario": "thresholds",
            "scenario_params": {"n": 40},
        })
        assert response.status_code == 400
        assert response.json()["error"] == "ScaleCapExceeded"
        assert "max_instances" in response.json()["detail"]

    def test_trial_count_is_capped(self, client: TestClient):
        response = client.post("/api/v1/acceptance/dimensions", json={"trials": 5000})
        assert response.status_code == 200
        assert response.json()["trials"] == 200
