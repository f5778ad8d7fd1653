"""Configuration centralisée de la librairie avec Pydantic Settings."""

import logging
import sys
from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseSettings):
    """Configuration centralisée.

    Les valeurs sont chargées depuis les variables d'environnement
    ou le fichier .env à la racine du projet. Les options de la CLI
    priment sur l'environnement.
    """

    # Application
    app_name: str = "Robust Oracle Lab"
    app_version: str = "0.1.0"
    environment: str = "development"
    debug: bool = False
    log_level: str = "INFO"

    # Expériences
    master_seed: int = 20240601
    jobs: int = 1
    output_dir: str = "results"
    record_timings: bool = False

    # Plafonds « desk scale » (erreurs dures au-delà)
    max_instances: int = 16
    max_hypotheses: int = 4096
    expert_family_cap: int = 2_000_000
    expert_group_cap: int = 200_000

    # Plafonds de relance
    weak_retry_cap: int = 100
    sparsify_retry_cap: int = 200
    scenario_retry_cap: int = 50

    # API
    api_v1_prefix: str = "/api/v1"
    allowed_origins: str = "http://localhost:3000"

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore"
    )

    @property
    def origins_list(self) -> list[str]:
        """Parse CORS origins string to list.

        Returns:
            list[str]: Liste des origins autorisées pour CORS
        """
        return [origin.strip() for origin in self.allowed_origins.split(",")]


@lru_cache
def get_settings() -> Settings:
    """Factory pour obtenir les settings (avec cache).

    Utilisé comme dependency injection dans FastAPI et par la CLI.

    Returns:
        Settings: Instance unique des settings
    """
    return Settings()


def configure_logging(settings: Settings, level: str | None = None) -> None:
    """Installe un unique handler stderr sur le logger racine.

    Les résultats JSON-lines sortent sur stdout ou dans --out, jamais
    mélangés aux logs.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or settings.log_level).upper())
