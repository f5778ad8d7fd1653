"""
Générateurs de scénarios reproductibles et valeurs de référence exactes
(force brute) utilisées par les assertions du harness.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from src.config import Settings, get_settings
from src.models.base import RobustLearningError
from src.models.enums import ScenarioKind
from src.models.perturbation import PerturbationSet
from src.models.universe import FiniteDistribution, HypothesisClass, InstanceSpace, LabeledExample
from src.schemas.dimensions import DimensionReport
from src.services.dimension_service import (
    check_scale,
    dimension_report,
    littlestone_dimension,
    make_full_cube,
    make_threshold_class,
)
from src.services.perturbation_service import error_patterns, opt_robust_risk, robust_loss_matrix

logger = logging.getLogger(__name__)


class ScenarioGenerationError(RobustLearningError):
    """Raised when a realizable scenario cannot be produced within the retry cap."""
    pass


@dataclass
class Scenario:
    """
    Instance complète d'une expérience : (X, H, U, D).

    Attributes:
        target: ligne de H ayant servi à étiqueter D (None pour `custom`)
        realizable: inf_h R_U(h; D) = 0, calculé exactement
    """
    kind: ScenarioKind
    space: InstanceSpace
    hypotheses: HypothesisClass
    u: PerturbationSet
    distribution: FiniteDistribution
    realizable: bool
    seed: Optional[int] = None
    target: Optional[int] = None
    params: dict[str, Any] = field(default_factory=dict)
    attempts: int = 1


def neighbor_perturbation(n: int, radius: int = 1) -> PerturbationSet:
    """U(x) = {x, ..., min(x + radius, n - 1)}."""
    return PerturbationSet([range(x, min(x + radius, n - 1) + 1) for x in range(n)])


def random_perturbation(n: int, extra: int, rng: np.random.Generator) -> PerturbationSet:
    """U(x) contient x et jusqu'à `extra` autres instances tirées uniformément."""
    sets = []
    for x in range(n):
        count = int(rng.integers(0, extra + 1))
        others = rng.choice(n, size=min(count, n), replace=False)
        sets.append({x, *(int(z) for z in others)})
    return PerturbationSet(sets)


def random_class(n_instances: int, n_hypotheses: int, rng: np.random.Generator) -> HypothesisClass:
    """Lignes ±1 uniformes, dédoublonnées (au plus 2^n lignes)."""
    rows = np.unique(rng.choice((-1, 1), size=(n_hypotheses, n_instances)), axis=0)
    return HypothesisClass(rows)


def _labelled_distribution(
    hypotheses: HypothesisClass,
    u: PerturbationSet,
    target: int,
    rng: np.random.Generator,
    support: Optional[int],
    realizable: bool,
    noise: float,
) -> Optional[FiniteDistribution]:
    labels = hypotheses.labels[target]
    if realizable:
        candidates = [x for x in range(hypotheses.n_instances) if np.all(labels[u.array(x)] == labels[x])]
    else:
        candidates = list(range(hypotheses.n_instances))
    if not candidates:
        return None
    size = len(candidates) if support is None else min(support, len(candidates))
    chosen = sorted(int(x) for x in rng.choice(candidates, size=size, replace=False))
    examples = []
    for x in chosen:
        label = int(labels[x])
        if not realizable and rng.random() < noise:
            label = -label
        examples.append(LabeledExample(x, label))
    return FiniteDistribution.from_weights(examples, list(rng.dirichlet(np.ones(len(examples)))))


def _custom_scenario(params: dict[str, Any]) -> tuple[HypothesisClass, PerturbationSet, FiniteDistribution]:
    hypotheses = HypothesisClass.from_rows(params["rows"])
    n = hypotheses.n_instances
    u = PerturbationSet(params.get("sets") or [[x] for x in range(n)], n)
    atoms = params["atoms"]
    distribution = FiniteDistribution.from_weights(
        [LabeledExample(int(x), int(y)) for x, y, _ in atoms],
        [float(p) for _, _, p in atoms],
    )
    distribution.check_range(n)
    return hypotheses, u, distribution


def generate_scenario(
    kind: Union[ScenarioKind, str],
    params: Optional[dict[str, Any]] = None,
    seed: int = 0,
    realizable: bool = True,
    settings: Optional[Settings] = None,
) -> Scenario:
    """
    Génère un scénario reproductible.

    Paramètres reconnus :
      - thresholds : n (8), radius (1)
      - random-class : instances (6), hypotheses (12), extra (2), support, max_littlestone
      - full-cube : k (3), radius (0)
      - custom : rows, sets, atoms ([x, y, p])
      - tous : noise (0.2) pour les scénarios non réalisables

    Raises:
        ScenarioGenerationError: aucun scénario réalisable dans la limite de régénérations.
        ScaleCapExceeded: classe au-delà des plafonds.
    """
    kind = ScenarioKind(kind)
    params = dict(params or {})
    settings = settings or get_settings()
    rng = np.random.default_rng(seed)
    noise = float(params.get("noise", 0.2))

    if kind == ScenarioKind.CUSTOM:
        hypotheses, u, distribution = _custom_scenario(params)
        check_scale(hypotheses, settings)
        opt, _ = opt_robust_risk(hypotheses, distribution, u)
        if realizable and opt > 0:
            raise ScenarioGenerationError(f"custom scenario is not realizable (opt robust risk {opt:.4f})")
        return Scenario(kind, hypotheses.space, hypotheses, u, distribution, opt == 0, seed, None, params)

    for attempt in range(1, settings.scenario_retry_cap + 1):
        if kind == ScenarioKind.THRESHOLDS:
            n = int(params.get("n", 8))
            _, hypotheses = make_threshold_class(n)
            u = neighbor_perturbation(n, int(params.get("radius", 1)))
        elif kind == ScenarioKind.FULL_CUBE:
            k = int(params.get("k", 3))
            _, hypotheses = make_full_cube(k)
            u = neighbor_perturbation(k, int(params.get("radius", 0)))
        else:
            n = int(params.get("instances", 6))
            hypotheses = random_class(n, int(params.get("hypotheses", 12)), rng)
            u = random_perturbation(n, int(params.get("extra", 2)), rng)
        check_scale(hypotheses, settings)
        max_lit = params.get("max_littlestone")
        if max_lit is not None and littlestone_dimension(hypotheses) > int(max_lit):
            logger.warning("scenario %s attempt %d: littlestone above %s, regenerating", kind.value, attempt, max_lit)
            continue
        target = int(rng.integers(hypotheses.n_hypotheses))
        distribution = _labelled_distribution(hypotheses, u, target, rng, params.get("support"), realizable, noise)
        if distribution is None:
            logger.warning("scenario %s attempt %d: no robust support for the target, regenerating", kind.value, attempt)
            continue
        opt, _ = opt_robust_risk(hypotheses, distribution, u)
        if realizable and opt > 0:
            logger.warning("scenario %s attempt %d: not realizable, regenerating", kind.value, attempt)
            continue
        return Scenario(kind, hypotheses.space, hypotheses, u, distribution, opt == 0, seed, target, params, attempt)
    raise ScenarioGenerationError(
        f"no {'realizable ' if realizable else ''}{kind.value} scenario within {settings.scenario_retry_cap} attempts"
    )


@dataclass
class ReferenceValues:
    """Valeurs exactes calculées par énumération."""
    opt_risk: float
    opt_row: int
    report: DimensionReport


def brute_force_oracle_suite(scenario: Scenario, settings: Optional[Settings] = None) -> ReferenceValues:
    """
    inf_h R_U(h; D) et dimensions de la classe, par énumération.

    Raises:
        ScaleCapExceeded: classe au-delà des plafonds.
    """
    check_scale(scenario.hypotheses, settings)
    opt, row = opt_robust_risk(scenario.hypotheses, scenario.distribution, scenario.u)
    return ReferenceValues(opt, row, dimension_report(scenario.hypotheses))


def sample_opt(hypotheses: HypothesisClass, sample: Sequence[LabeledExample], u: PerturbationSet) -> tuple[int, int]:
    """(min_h Σ pertes robustes sur l'échantillon, ligne qui l'atteint)."""
    totals = robust_loss_matrix(hypotheses, sample, u).sum(axis=1)
    best = int(np.argmin(totals))
    return int(totals[best]), best


def max_realizable_size(hypotheses: HypothesisClass, sample: Sequence[LabeledExample], u: PerturbationSet) -> int:
    """Taille maximale d'une sous-suite H-réalisable (robustement) de l'échantillon."""
    losses, _ = sample_opt(hypotheses, sample, u)
    return len(sample) - losses


def reference_patterns(pool_tables: np.ndarray, sample: Sequence[LabeledExample], u: PerturbationSet) -> set[bytes]:
    """Ensemble exhaustif des motifs d'erreur sur S_U."""
    return error_patterns(pool_tables, sample, u)
