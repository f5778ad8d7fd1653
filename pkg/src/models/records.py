"""
Enregistrements produits par les algorithmes (immutables une fois construits).
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.models.base import Predictor
from src.models.predictors import ErrorPatternIndex


@dataclass(frozen=True)
class MistakeRecord:
    """Erreurs d'un apprenant en ligne sur une séquence."""
    length: int
    mistakes: tuple[int, ...]
    final_predictor: Predictor
    version_space_emptied: bool = False

    @property
    def count(self) -> int:
        return len(self.mistakes)

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "mistakes": list(self.mistakes),
            "count": self.count,
            "final_fingerprint": self.final_predictor.fingerprint,
            "version_space_emptied": self.version_space_emptied,
        }


@dataclass(frozen=True)
class CompressionStep:
    """Une mise à jour de l'apprenant : perturbation (z, y) et exemple d'origine."""
    instance: int
    label: int
    origin: int
    origin_instance: int


@dataclass(frozen=True)
class CompressionRecord:
    """
    Séquence de compression κ(S) d'un passage de CycleRobust.

    Attributes:
        steps: mises à jour dans l'ordre où l'apprenant les a reçues
        passes: nombre de passes complètes sur l'échantillon
        queries: nombre de requêtes à l'oracle
    """
    steps: tuple[CompressionStep, ...]
    passes: int
    queries: int

    @property
    def size(self) -> int:
        return len(self.steps)

    @property
    def origins(self) -> tuple[int, ...]:
        """Indices d'origine distincts, triés (vue « points originaux »)."""
        return tuple(sorted({step.origin for step in self.steps}))

    def signature(self) -> tuple[tuple[int, int, int], ...]:
        return tuple((step.instance, step.label, step.origin) for step in self.steps)


@dataclass
class HypothesisPool:
    """
    Ĥ = {CycleRobust(L) : L ⊆ S, |L| = n}, dédoublonné par table de vérité.

    Attributes:
        members: prédicteurs distincts, dans l'ordre de première apparition
        subset_index: sous-ensemble (indices triés) → position dans members
        subset_size: n
        queries: requêtes consommées pour construire le pool
    """
    members: list[Predictor]
    subset_index: dict[tuple[int, ...], int]
    subset_size: int
    queries: int = 0

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def tables(self) -> np.ndarray:
        return np.stack([member.table for member in self.members])

    def member_for(self, subset: tuple[int, ...]) -> Predictor:
        return self.members[self.subset_index[subset]]


@dataclass(frozen=True)
class DiscretizedPoint:
    instance: int
    label: int
    pattern: bytes
    origin: int


@dataclass
class DiscretizedSet:
    """Ŝ_U : un représentant par motif d'erreur distinct."""
    points: list[DiscretizedPoint]
    index: ErrorPatternIndex
    probe_queries: int = 0

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def patterns(self) -> set[bytes]:
        return {point.pattern for point in self.points}


@dataclass(frozen=True)
class BoostRound:
    subset: tuple[int, ...]
    predictor: Predictor
    weighted_error: float
    normalizer: float
    redraws: int


@dataclass
class BoostRun:
    """
    Trace d'un α-Boost sur l'ensemble discrétisé.

    Attributes:
        rounds: tours acceptés, dans l'ordre
        alpha: pas α
        distributions: D_t pour t = 1..T (matrice T × |Ŝ|)
        correct: matrice booléenne T × |Ŝ|, f_t correct sur chaque point
    """
    rounds: list[BoostRound]
    alpha: float
    distributions: np.ndarray
    correct: np.ndarray

    @property
    def length(self) -> int:
        return len(self.rounds)

    @property
    def vote_fractions(self) -> np.ndarray:
        return self.correct.mean(axis=0)

    @property
    def margin(self) -> float:
        return float(self.vote_fractions.min())


@dataclass
class WeightState:
    """
    Poids du Weighted Majority, en log pour éviter les sous-dépassements.

    Attributes:
        log_weights: log-poids par expert (ou par groupe d'experts)
        eta: facteur multiplicatif η
        rounds: tours joués
        mistakes: erreurs robustes du vote pondéré
    """
    log_weights: np.ndarray
    eta: float
    rounds: int = 0
    mistakes: int = 0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def log_total(self) -> float:
        return float(np.logaddexp.reduce(self.log_weights)) if self.log_weights.size else float("-inf")


@dataclass(frozen=True)
class ExpertSpec:
    """Expert(i_1, ..., i_L) : tours (1-indexés) où l'expert inverse SOA."""
    flips: tuple[int, ...]
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("expert horizon must be >= 1")
        if any(b <= a for a, b in zip(self.flips, self.flips[1:])):
            raise ValueError(f"flip rounds must be strictly increasing, got {self.flips}")
        if self.flips and (self.flips[0] < 1 or self.flips[-1] > self.horizon):
            raise ValueError(f"flip rounds must lie in 1..{self.horizon}")


@dataclass(frozen=True)
class GameRound:
    instance: int
    label: int
    perturbation: int
    prediction: int
    success: bool
    fingerprint: str


@dataclass
class GameTranscript:
    """Tours d'un jeu d'attaque en ligne ; success ⇔ prédiction ≠ y."""
    rounds: list[GameRound] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return sum(1 for game_round in self.rounds if game_round.success)


@dataclass
class ThresholdGameState:
    """
    État du jeu de borne inférieure : secret r et espace de versions visible.

    Attributes:
        d: nombre de seuils (instances x_1..x_d, plus x_0 en position d)
        secret: indice r ∈ {1, ..., d-1} du seuil caché
        version_space: seuils candidats encore compatibles avec les réponses
    """
    d: int
    secret: int
    version_space: list[int]
    sizes: list[int] = field(default_factory=list)
    queries: int = 0
    output: Optional[Predictor] = None
