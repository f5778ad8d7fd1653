from fastapi import APIRouter, Depends, HTTPException

from src.config import Settings, get_settings
from src.models.enums import SuiteId
from src.schemas.experiment import AcceptanceReport, ExperimentConfig
from src.services import acceptance_service

router = APIRouter(prefix="/api/v1/acceptance", tags=["acceptance"])

# plafond d'essais par requête HTTP ; la batterie complète passe par la CLI
MAX_HTTP_TRIALS = 200


@router.post("/{suite}", response_model=AcceptanceReport)
def run_suite(suite: SuiteId, config: ExperimentConfig, settings: Settings = Depends(get_settings)):
    """Exécute une suite d'acceptation à effectif réduit et renvoie son rapport.

    Les erreurs du domaine (plafonds dépassés, échecs d'algorithme) sont
    rendues en 400 par le handler de l'application.
    """
    if config.trials is None or config.trials > MAX_HTTP_TRIALS:
        config = config.model_copy(update={"trials": min(config.trials or 10, MAX_HTTP_TRIALS)})
    if config.class_file or config.perturbation_file or config.distribution_file:
        raise HTTPException(status_code=422, detail="file sources are only available from the CLI")
    return acceptance_service.run_acceptance(suite, config, settings).report
