"""Configuration globale pytest et fixtures réutilisables."""

import pytest
from fastapi.testclient import TestClient

from src.api.main import app
from src.config import Settings, get_settings
from src.models.enums import ScenarioKind
from src.models.perturbation import PerturbationSet
from src.services.dimension_service import make_threshold_class
from src.services.scenario_service import Scenario, generate_scenario


@pytest.fixture
def settings() -> Settings:
    """Settings de test : plafonds par défaut, sans chronométrage."""
    return Settings(record_timings=False, output_dir="results")


@pytest.fixture
def threshold_class():
    """Classe des seuils H_8 (vc = 1, lit = 3, Tdim = 8)."""
    _, hypotheses = make_threshold_class(8)
    return hypotheses


@pytest.fixture
def threshold_scenario(settings) -> Scenario:
    """Seuils n = 8, U(x) = {x, x+1}, réalisable."""
    return generate_scenario(ScenarioKind.THRESHOLDS, {"n": 8, "radius": 1}, seed=3, realizable=True, settings=settings)


@pytest.fixture
def random_scenario(settings) -> Scenario:
    """Petite classe aléatoire réalisable, lit ≤ 3."""
    return generate_scenario(
        ScenarioKind.RANDOM_CLASS,
        {"instances": 6, "hypotheses": 12, "extra": 2, "max_littlestone": 3},
        seed=11,
        realizable=True,
        settings=settings,
    )


@pytest.fixture
def identity_perturbation() -> PerturbationSet:
    """U(x) = {x} sur 8 instances : le cas non robuste classique."""
    return PerturbationSet.identity(8)


@pytest.fixture
def client(settings: Settings):
    """Fixture pour obtenir un TestClient FastAPI.

    Remplace la dépendance get_settings par les settings de test.

    Yields:
        TestClient: Client de test FastAPI
    """
    app.dependency_overrides[get_settings] = lambda: settings

    with TestClient(app) as test_client:
        yield test_client

    app.dependency_overrides.clear()
