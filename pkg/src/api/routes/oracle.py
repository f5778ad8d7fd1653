from fastapi import APIRouter, HTTPException

from src.schemas.experiment import AttackCheckReport, AttackCheckRequest
from src.services import serialization_service
from src.services.serialization_service import FormatError

router = APIRouter(prefix="/api/v1/attack-check", tags=["oracle"])


@router.post("/", response_model=AttackCheckReport)
def attack_check(data: AttackCheckRequest):
    """Revérifie un journal de requêtes (ou une transcription) contre un fichier de perturbations."""
    try:
        u = serialization_service.parse_perturbation(data.perturbation)
    except FormatError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return serialization_service.attack_check(data.log.splitlines(), u)
