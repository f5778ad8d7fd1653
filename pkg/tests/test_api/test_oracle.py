import json

from fastapi.testclient import TestClient

PERTURBATION = "instances 2\nu 0 : 0 1\nu 1 : 1\n"


def query_line(table: str, instance: int, label: int, counterexample=None) -> str:
    return json.dumps({
        "index": 0, "fingerprint": table, "table": table,
        "instance": instance, "label": label, "counterexample": counterexample,
    })


class TestAttackCheckEndpoint:
    def test_valid_log(self, client: TestClient):
        log = "\n".join([query_line("+-", 0, 1, 1), query_line("++", 0, 1)])
        response = client.post("/api/v1/attack-check/", json={"perturbation": PERTURBATION, "log": log})

        assert response.status_code == 200
        data = response.json()
        assert data["ok"] is True
        assert data["entries"] == data["verified"] == 2

    def test_counterexample_outside_perturbation_set(self, client: TestClient):
        log = query_line("-+", 1, 1, 0)
        response = client.post("/api/v1/attack-check/", json={"perturbation": PERTURBATION, "log": log})

        data = response.json()
        assert data["ok"] is False
        assert data["failures"][0]["line"] == 1
        assert "not in U(1)" in data["failures"][0]["reason"]

    def test_malformed_perturbation_file(self, client: TestClient):
        response = client.post("/api/v1/attack-check/", json={"perturbation": "instances 2\n", "log": "{}"})
        assert response.status_code == 422

    def test_empty_log_rejected(self, client: TestClient):
        response = client.post("/api/v1/attack-check/", json={"perturbation": PERTURBATION, "log": ""})
        assert response.status_code == 422
