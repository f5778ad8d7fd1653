"""
Pertes et risques robustes exacts, oracle d'attaque canonique.
"""
import logging
import math
from typing import Iterable, Sequence

import numpy as np

from src.models.base import Predictor, RobustLearningError
from src.models.perturbation import OracleResponse, PerturbationSet
from src.models.universe import FiniteDistribution, HypothesisClass, LabeledExample

logger = logging.getLogger(__name__)


class ContractViolation(RobustLearningError):
    """Raised when an oracle or attacker returns a response that breaks its contract."""
    pass


def robust_loss(predictor: Predictor, example: LabeledExample, u: PerturbationSet) -> int:
    """1 si un z ∈ U(x) est mal classé, 0 sinon (parcours exhaustif de U(x))."""
    return int(np.any(predictor.table[u.array(example.instance)] != example.label))


def robust_losses(predictor: Predictor, examples: Sequence[LabeledExample], u: PerturbationSet) -> np.ndarray:
    return np.array([robust_loss(predictor, example, u) for example in examples], dtype=np.int64)


def robust_risk(predictor: Predictor, distribution: FiniteDistribution, u: PerturbationSet) -> float:
    """Somme exacte des masses des atomes où la perte robuste vaut 1."""
    return math.fsum(
        probability for example, probability in distribution.atoms
        if robust_loss(predictor, example, u)
    )


def zero_one_risk(predictor: Predictor, distribution: FiniteDistribution) -> float:
    return math.fsum(
        probability for example, probability in distribution.atoms
        if predictor(example.instance) != example.label
    )


def robust_loss_matrix(
    hypotheses: HypothesisClass,
    examples: Sequence[LabeledExample],
    u: PerturbationSet,
) -> np.ndarray:
    """Matrice booléenne (|H| × m) : la ligne h perd-elle robustement sur l'exemple i ?"""
    columns = [
        np.any(hypotheses.labels[:, u.array(example.instance)] != example.label, axis=1)
        for example in examples
    ]
    if not columns:
        return np.zeros((hypotheses.n_hypotheses, 0), dtype=bool)
    return np.stack(columns, axis=1)


def opt_robust_risk(
    hypotheses: HypothesisClass,
    distribution: FiniteDistribution,
    u: PerturbationSet,
) -> tuple[float, int]:
    """
    Minimum exact de R_U(h; D) sur les lignes de H.

    Returns:
        tuple: (risque minimal, première ligne qui l'atteint)
    """
    losses = robust_loss_matrix(hypotheses, distribution.examples, u)
    risks = [math.fsum(p for p, lost in zip(distribution.probabilities, row) if lost) for row in losses]
    best = int(np.argmin(risks))
    return risks[best], best


def empirical_robust_loss(predictor: Predictor, sample: Sequence[LabeledExample], u: PerturbationSet) -> float:
    """Fraction des exemples de l'échantillon avec perte robuste 1.

    Raises:
        ValueError: Si l'échantillon est vide.
    """
    if not sample:
        raise ValueError("empirical robust loss needs a nonempty sample")
    return float(robust_losses(predictor, sample, u).mean())


def verify_response(
    predictor: Predictor,
    example: LabeledExample,
    u: PerturbationSet,
    response: OracleResponse,
) -> None:
    """Revérifie une réponse d'oracle contre U.

    Raises:
        ContractViolation: z ∉ U(x), z bien classé, ou certificat alors qu'une perturbation est mal classée.
    """
    if response.is_robust:
        if robust_loss(predictor, example, u):
            raise ContractViolation(
                f"oracle certified {example!r} but U({example.instance}) holds a misclassified point"
            )
        return
    z = response.counterexample
    if not u.contains(example.instance, z):
        raise ContractViolation(f"counterexample {z} is not in U({example.instance})")
    if predictor(z) == example.label:
        raise ContractViolation(f"counterexample {z} is correctly classified as {example.label:+d}")


class CanonicalOracle:
    """
    Oracle parfait déterministe : parcourt U(x) dans l'ordre croissant
    (ou décroissant) et renvoie le premier z mal classé.

    Sans état ; sûr en accès concurrent.
    """

    def __init__(self, u: PerturbationSet, descending: bool = False):
        self.u = u
        self.descending = descending

    def query(self, predictor: Predictor, example: LabeledExample) -> OracleResponse:
        members = self.u.array(example.instance)
        if self.descending:
            members = members[::-1]
        wrong = np.flatnonzero(predictor.table[members] != example.label)
        if wrong.size == 0:
            return OracleResponse.robustly_correct()
        response = OracleResponse.perturbation(int(members[wrong[0]]))
        verify_response(predictor, example, self.u, response)
        return response


def canonical_oracle(u: PerturbationSet) -> CanonicalOracle:
    return CanonicalOracle(u)


class CheckingOracle:
    """Enveloppe un oracle quelconque et revérifie chacune de ses réponses."""

    def __init__(self, oracle, u: PerturbationSet):
        self.oracle = oracle
        self.u = u

    def query(self, predictor: Predictor, example: LabeledExample) -> OracleResponse:
        response = self.oracle.query(predictor, example)
        verify_response(predictor, example, self.u, response)
        return response


def error_patterns(
    pool_tables: np.ndarray,
    sample: Iterable[LabeledExample],
    u: PerturbationSet,
) -> set[bytes]:
    """Énumération brute des motifs g_{(z,y)} pour tous les z ∈ U(x), (x, y) ∈ S."""
    tables = np.asarray(pool_tables)
    return {
        np.packbits(tables[:, z] != example.label).tobytes()
        for example in sample
        for z in u[example.instance]
    }
