from .acceptance import router as acceptance_router
from .dimensions import router as dimensions_router
from .oracle import router as oracle_router
from .scenarios import router as scenarios_router

__all__ = ["acceptance_router", "dimensions_router", "oracle_router", "scenarios_router"]
