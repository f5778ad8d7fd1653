from fastapi import APIRouter, Depends, HTTPException

from src.config import Settings, get_settings
from src.models.universe import HypothesisClass
from src.schemas.dimensions import DimensionReport, DimensionRequest
from src.services import dimension_service
from src.services.dimension_service import ScaleCapExceeded

router = APIRouter(prefix="/api/v1/dimensions", tags=["dimensions"])


@router.post("/", response_model=DimensionReport)
def compute_dimensions(data: DimensionRequest, settings: Settings = Depends(get_settings)):
    """Calcule VC, VC duale, Littlestone et dimension de seuil d'une classe."""
    if any(len(row) != data.instances for row in data.rows):
        raise HTTPException(status_code=422, detail=f"every row must have {data.instances} labels")
    try:
        hypotheses = HypothesisClass.from_rows(data.rows)
        dimension_service.check_scale(hypotheses, settings)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except ScaleCapExceeded as e:
        raise HTTPException(status_code=400, detail=str(e))
    return dimension_service.dimension_report(hypotheses)
