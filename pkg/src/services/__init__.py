from . import (
    acceptance_service,
    compression_service,
    dimension_service,
    game_service,
    online_service,
    perturbation_service,
    rlua_service,
    scenario_service,
    serialization_service,
    weighted_majority_service,
)

__all__ = [
    "acceptance_service",
    "compression_service",
    "dimension_service",
    "game_service",
    "online_service",
    "perturbation_service",
    "rlua_service",
    "scenario_service",
    "serialization_service",
    "weighted_majority_service",
]
