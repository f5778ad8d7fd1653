"""Application FastAPI : dimensions, scénarios, revérification des journaux et suites d'acceptation."""

import logging

from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from src.api.routes import acceptance_router, dimensions_router, oracle_router, scenarios_router
from src.config import Settings, get_settings
from src.models.base import RobustLearningError

logger = logging.getLogger(__name__)

settings = get_settings()

app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    description="Apprentissage robuste avec oracles d'attaque : dimensions, scénarios, revérification et acceptation",
    docs_url="/docs",
    redoc_url="/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.origins_list,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(dimensions_router)
app.include_router(oracle_router)
app.include_router(scenarios_router)
app.include_router(acceptance_router)


@app.exception_handler(RobustLearningError)
async def robust_learning_error_handler(request: Request, exc: RobustLearningError) -> JSONResponse:
    """Erreurs du domaine non interceptées par les routes : plafonds, échecs d'algorithme.

    Returns:
        JSONResponse: 400 avec le type d'erreur et son message
    """
    logger.warning("%s %s: %s: %s", request.method, request.url.path, type(exc).__name__, exc)
    return JSONResponse(status_code=400, content={"detail": str(exc), "error": type(exc).__name__})


@app.get("/health", tags=["System"])
def health_check(current: Settings = Depends(get_settings)):
    """Health check, avec les plafonds appliqués aux requêtes.

    Returns:
        dict: Status, version, environnement et plafonds |X| / |H|
    """
    return {
        "status": "healthy",
        "app": current.app_name,
        "version": current.app_version,
        "environment": current.environment,
        "limits": {
            "max_instances": current.max_instances,
            "max_hypotheses": current.max_hypotheses,
        },
    }


@app.get("/", tags=["System"])
def root(current: Settings = Depends(get_settings)):
    return {
        "message": "Robust Oracle Lab API",
        "docs": "/docs",
        "health": "/health",
        "endpoints": sorted({route.path for route in app.routes if route.path.startswith(current.api_v1_prefix)}),
    }
