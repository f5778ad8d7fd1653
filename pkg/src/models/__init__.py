"""
Models package - Expose les types du domaine.
"""
from .base import Predictor, RobustLearningError
from .enums import AttackerKind, ExpertMode, ScenarioKind, StrategyKind, SuiteId, Verdict
from .universe import FiniteDistribution, HypothesisClass, InstanceSpace, LabeledExample
from .perturbation import AttackOracle, OracleResponse, PerturbationSet, QueryLog
from .predictors import (
    ClassMember,
    MajorityVote,
    OnlineState,
    PatternPredictor,
    TableLookup,
    WeightedMajority,
)

__all__ = [
    "Predictor",
    "RobustLearningError",
    "AttackerKind",
    "ExpertMode",
    "ScenarioKind",
    "StrategyKind",
    "SuiteId",
    "Verdict",
    "FiniteDistribution",
    "HypothesisClass",
    "InstanceSpace",
    "LabeledExample",
    "AttackOracle",
    "OracleResponse",
    "PerturbationSet",
    "QueryLog",
    "ClassMember",
    "MajorityVote",
    "OnlineState",
    "PatternPredictor",
    "TableLookup",
    "WeightedMajority",
]
