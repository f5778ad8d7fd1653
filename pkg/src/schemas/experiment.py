from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field

from src.models.enums import AttackerKind, ExpertMode, ScenarioKind, StrategyKind, SuiteId, Verdict
from src.schemas.dimensions import DimensionReport


class ExperimentConfig(BaseModel):
    """
    Configuration d'une exécution (CLI `--config`, corps des requêtes d'acceptation).

    Les champs à None prennent la valeur par défaut de la suite ou de
    l'algorithme. La sérialisation JSON est stable : model_dump_json puis
    model_validate_json redonne exactement les mêmes octets.
    """
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    scenario: Optional[ScenarioKind] = None
    scenario_params: dict[str, Any] = Field(default_factory=dict)
    realizable: Optional[bool] = None
    class_file: Optional[str] = None
    perturbation_file: Optional[str] = None
    distribution_file: Optional[str] = None

    m: Optional[int] = Field(None, ge=1, le=100_000, description="Taille d'échantillon")
    n: Optional[int] = Field(None, ge=1, le=16, description="Taille des sous-ensembles de RLUA")
    rounds: Optional[int] = Field(None, ge=1, le=100_000, description="T : tours de boosting ou horizon")
    votes: Optional[int] = Field(None, ge=1, le=100_000, description="N : votes de la sparsification")
    eta: Optional[float] = Field(None, ge=0, lt=1)
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    delta: Optional[float] = Field(None, gt=0, lt=1)

    trials: Optional[int] = Field(None, ge=1, le=1_000_000)
    seed: int = Field(20240601, ge=0)
    jobs: int = Field(1, ge=1, le=256)

    attacker: AttackerKind = AttackerKind.EPS_BLIND
    blindness: float = Field(0.3, ge=0, le=1)
    strategy: Optional[StrategyKind] = None
    d: Optional[int] = Field(None, ge=3, le=4096)
    expert_mode: ExpertMode = ExpertMode.GROUPED
    pretrain: int = Field(0, ge=0)


class TrialResult(BaseModel):
    """Une ligne JSON-lines : mesures d'un essai, déterministes pour (config, trial)."""
    suite: str
    scenario: str
    trial: int = Field(..., ge=0)
    seed: int
    risk: Optional[float] = None
    opt: Optional[float] = None
    mistakes: Optional[int] = None
    queries: Optional[int] = None
    compression_size: Optional[int] = None
    bound: Optional[float] = None
    violation: bool = False
    hard_violation: bool = False
    extra: dict[str, Any] = Field(default_factory=dict)
    wall_time: Optional[float] = None


class Criterion(BaseModel):
    """Un critère d'acceptation évalué sur l'ensemble des essais."""
    name: str
    description: str
    observed: float
    threshold: float
    trials: int
    violations: int = 0
    passed: bool

    @computed_field
    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.passed else Verdict.FAIL


class AcceptanceReport(BaseModel):
    """Document de synthèse d'une suite d'acceptation."""
    suite: SuiteId
    seed: int
    trials: int
    criteria: list[Criterion] = Field(default_factory=list)

    @computed_field
    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if all(c.passed for c in self.criteria) else Verdict.FAIL


class ScenarioRequest(BaseModel):
    """Corps de POST /api/v1/scenarios."""
    kind: ScenarioKind
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(0, ge=0)
    realizable: bool = True


class ScenarioSummary(BaseModel):
    kind: ScenarioKind
    instances: int
    hypotheses: int
    realizable: bool
    attempts: int
    target: Optional[int] = None
    opt_robust_risk: float
    dimensions: DimensionReport
    perturbation: list[list[int]]
    atoms: list[tuple[int, int, float]]


class AttackCheckRequest(BaseModel):
    """Corps de POST /api/v1/attack-check : fichier de perturbations + journal JSON-lines."""
    perturbation: str = Field(..., min_length=1)
    log: str = Field(..., min_length=1)


class AttackCheckEntry(BaseModel):
    line: int
    ok: bool
    reason: Optional[str] = None


class AttackCheckReport(BaseModel):
    entries: int
    verified: int
    failures: list[AttackCheckEntry] = Field(default_factory=list)

    @computed_field
    @property
    def ok(self) -> bool:
        return not self.failures


class QueryLogLine(BaseModel):
    """Une requête à l'oracle sérialisée ; `table` en chaîne '+-' pour la revérification."""
    index: int
    stage: str = ""
    fingerprint: str
    table: str
    instance: int
    label: int
    counterexample: Optional[int] = None


class TranscriptLine(BaseModel):
    """Un tour du jeu d'attaque en ligne."""
    round: int
    instance: int
    label: int
    perturbation: int
    prediction: int
    success: bool
    fingerprint: str
