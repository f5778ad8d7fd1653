"""Tests pour les endpoints système de l'API."""

from fastapi.testclient import TestClient

from src.api.main import app
from src.config import Settings, get_settings


class TestSystemEndpoints:
    def test_root_lists_versioned_endpoints(self, client: TestClient):
        response = client.get("/")

        assert response.status_code == 200
        data = response.json()
        assert data["message"] == "Robust Oracle Lab API"
        assert data["health"] == "/health"
        assert data["endpoints"] == [
            "/api/v1/acceptance/{suite}",
            "/api/v1/attack-check/",
            "/api/v1/dimensions/",
            "/api/v1/scenarios/",
        ]

    def test_health_reports_scale_caps(self, client: TestClient):
        """Test du health check : statut et plafonds |X| / |H| des settings injectés."""
        response = client.get("/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert data["app"] == "Robust Oracle Lab"
        assert data["limits"] == {"max_instances": 16, "max_hypotheses": 4096}

    def test_health_follows_settings_override(self):
        app.dependency_overrides[get_settings] = lambda: Settings(max_instances=4, max_hypotheses=10)
        try:
            with TestClient(app) as test_client:
                limits = test_client.get("/health").json()["limits"]
        finally:
            app.dependency_overrides.clear()
        assert limits == {"max_instances": 4, "max_hypotheses": 10}

    def test_openapi_documents_domain_routes(self, client: TestClient):
        paths = client.get("/openapi.json").json()["paths"]
        assert "/api/v1/dimensions/" in paths
        assert "post" in paths["/api/v1/acceptance/{suite}"]

    def test_docs_accessible(self, client: TestClient):
        assert client.get("/docs").status_code == 200
