"""
CycleRobust : apprentissage à perte robuste nulle par passes successives
certifiées par l'oracle, compression stable associée et bornes de
généralisation.
"""
import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from src.models.base import Predictor, RobustLearningError
from src.models.perturbation import AttackOracle, QueryLog
from src.models.records import CompressionRecord, CompressionStep
from src.models.universe import LabeledExample
from src.services.online_service import LearnerFactory, OnlineLearner
from src.services.perturbation_service import ContractViolation

logger = logging.getLogger(__name__)


class NonRealizableError(RobustLearningError):
    """Raised when CycleRobust cannot reach a robustly consistent hypothesis.

    Attributes:
        log: requêtes émises avant l'abandon
        record: séquence de compression partielle
    """

    def __init__(self, message: str, log: QueryLog, record: CompressionRecord):
        super().__init__(message)
        self.log = log
        self.record = record


def cycle_robust(
    sample: Sequence[LabeledExample],
    learner: OnlineLearner,
    oracle: AttackOracle,
    pass_cap: Optional[int] = None,
    log: Optional[QueryLog] = None,
    stage: str = "cycle",
) -> tuple[Predictor, CompressionRecord, QueryLog]:
    """
    Passe sur l'échantillon jusqu'à une passe complète sans contre-exemple.

    Chaque contre-exemple z renvoyé pour (x, y) est donné à l'apprenant
    sous la forme (z, y).

    Args:
        sample: exemples, parcourus dans l'ordre
        learner: apprenant en ligne conservatif, modifié en place
        oracle: oracle d'attaque parfait
        pass_cap: nombre maximal de passes (par défaut borne d'erreurs + 2)
        log: journal à compléter (un nouveau par défaut)

    Returns:
        tuple: (prédicteur, enregistrement de compression, journal)

    Raises:
        NonRealizableError: espace de versions vide ou plafond de passes atteint.
        ContractViolation: contre-exemple qui ne provoque pas d'erreur de l'apprenant.
    """
    if not learner.conservative:
        raise ValueError("cycle_robust needs a conservative online learner")
    log = QueryLog() if log is None else log
    if pass_cap is None:
        pass_cap = getattr(learner, "mistake_bound", len(sample)) + 2
    start = log.total
    steps: list[CompressionStep] = []
    passes = 0

    def partial() -> CompressionRecord:
        return CompressionRecord(tuple(steps), passes, log.total - start)

    while True:
        passes += 1
        clean = True
        for index, example in enumerate(sample):
            response = log.ask(oracle, learner.predictor(), example, stage)
            if response.is_robust:
                continue
            clean = False
            z = response.counterexample
            if not learner.update(LabeledExample(z, example.label)):
                raise ContractViolation(f"counterexample {z} for {example!r} was not a learner mistake")
            steps.append(CompressionStep(z, example.label, index, example.instance))
            if learner.flagged_empty:
                raise NonRealizableError(
                    f"version space emptied after {len(steps)} updates", log, partial()
                )
        if clean:
            break
        if passes >= pass_cap:
            raise NonRealizableError(f"no robust pass within {pass_cap} passes", log, partial())
    record = partial()
    logger.debug("cycle_robust: %d examples, %d updates, %d passes", len(sample), record.size, passes)
    return learner.predictor(), record, log


def replay_compression(record: CompressionRecord, learner_factory: LearnerFactory) -> Predictor:
    """Rejoue κ(S) dans un apprenant neuf ; doit reproduire la sortie de cycle_robust."""
    learner = learner_factory()
    for step in record.steps:
        learner.update(LabeledExample(step.instance, step.label))
    return learner.predictor()


def stability_check(
    sample: Sequence[LabeledExample],
    record: CompressionRecord,
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    draws: int = 20,
    seed: Union[int, np.random.Generator] = 0,
) -> bool:
    """
    Vérifie que retirer des exemples hors de κ(S) ne change rien.

    Teste S″ = S, S″ = κ(S) puis `draws` sous-suites aléatoires
    κ(S) ⊆ S″ ⊆ S (ordre préservé).

    Returns:
        bool: True si toutes les relances donnent la même compression et la même table.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    reference, _, _ = cycle_robust(sample, learner_factory(), oracle)
    kept = set(record.origins)
    others = [i for i in range(len(sample)) if i not in kept]
    candidates = [list(range(len(sample))), sorted(kept)]
    for _ in range(draws):
        chosen = kept | {i for i in others if rng.random() < 0.5}
        candidates.append(sorted(chosen))
    for indices in candidates:
        sub = [sample[i] for i in indices]
        output, sub_record, _ = cycle_robust(sub, learner_factory(), oracle)
        remapped = tuple((step.instance, step.label, indices[step.origin]) for step in sub_record.steps)
        if remapped != record.signature() or not output.same_labels(reference):
            logger.warning("stability check failed on a subsequence of size %d", len(indices))
            return False
    return True


def stable_compression_bound(m: int, k: int, delta: float) -> float:
    """(2 / (m - 2k)) · (k ln 4 + ln(1/δ)).

    Raises:
        ValueError: Si m ≤ 2k ou δ ∉ (0, 1).
    """
    if m <= 2 * k:
        raise ValueError(f"stable compression bound needs m > 2k, got m={m}, k={k}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 / (m - 2 * k) * (k * math.log(4) + math.log(1 / delta))


def robust_compression_bound(m: int, k: int, delta: float) -> float:
    """(1 / (m - k)) · (k ln m + ln(1/δ)).

    Raises:
        ValueError: Si m ≤ k ou δ ∉ (0, 1).
    """
    if m <= k:
        raise ValueError(f"robust compression bound needs m > k, got m={m}, k={k}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 1.0 / (m - k) * (k * math.log(m) + math.log(1 / delta))


def cyclerobust_sample_size(littlestone: int, epsilon: float, delta: float) -> int:
    """Plus petit m > 2·lit tel que stable_compression_bound(m, lit, δ) ≤ ε."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    budget = littlestone * math.log(4) + math.log(1 / delta)
    m = 2 * littlestone + max(1, math.ceil(2 * budget / epsilon))
    while m - 1 > 2 * littlestone and stable_compression_bound(m - 1, littlestone, delta) <= epsilon:
        m -= 1
    while stable_compression_bound(m, littlestone, delta) > epsilon:
        m += 1
    return m
