from .dimensions import DimensionReport, DimensionRequest
from .experiment import (
    AcceptanceReport,
    AttackCheckEntry,
    AttackCheckReport,
    AttackCheckRequest,
    Criterion,
    ExperimentConfig,
    QueryLogLine,
    ScenarioRequest,
    ScenarioSummary,
    TrialResult,
    TranscriptLine,
)

__all__ = [
    "DimensionReport",
    "DimensionRequest",
    "AcceptanceReport",
    "AttackCheckEntry",
    "AttackCheckReport",
    "AttackCheckRequest",
    "Criterion",
    "ExperimentConfig",
    "QueryLogLine",
    "ScenarioRequest",
    "ScenarioSummary",
    "TrialResult",
    "TranscriptLine",
]
