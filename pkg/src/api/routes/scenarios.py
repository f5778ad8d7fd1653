from fastapi import APIRouter, Depends, HTTPException

from src.config import Settings, get_settings
from src.models.base import RobustLearningError
from src.schemas.experiment import ScenarioRequest, ScenarioSummary
from src.services import scenario_service

router = APIRouter(prefix="/api/v1/scenarios", tags=["scenarios"])


@router.post("/", response_model=ScenarioSummary, status_code=201)
def create_scenario(data: ScenarioRequest, settings: Settings = Depends(get_settings)):
    """Génère un scénario reproductible et ses valeurs de référence exactes."""
    try:
        scenario = scenario_service.generate_scenario(data.kind, data.params, data.seed, data.realizable, settings)
        reference = scenario_service.brute_force_oracle_suite(scenario, settings)
    except (KeyError, ValueError) as e:
        raise HTTPException(status_code=422, detail=f"invalid scenario parameters: {e}")
    except RobustLearningError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return ScenarioSummary(
        kind=scenario.kind,
        instances=scenario.hypotheses.n_instances,
        hypotheses=scenario.hypotheses.n_hypotheses,
        realizable=scenario.realizable,
        attempts=scenario.attempts,
        target=scenario.target,
        opt_robust_risk=reference.opt_risk,
        dimensions=reference.report,
        perturbation=[list(members) for members in scenario.u.sets],
        atoms=[(e.instance, e.label, p) for e, p in scenario.distribution.atoms],
    )
