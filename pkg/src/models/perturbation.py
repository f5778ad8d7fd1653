"""
Ensembles de perturbations, réponses d'oracle et journal des requêtes.
"""
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Protocol, Sequence

import numpy as np

from src.models.base import Predictor
from src.models.universe import LabeledExample


class PerturbationSet:
    """
    Application explicite x ↦ U(x) ⊆ X.

    Chaque U(x) est non vide, trié, sans doublon. L'appartenance x ∈ U(x)
    n'est pas exigée.

    Args:
        sets: un itérable d'instances par instance x
        n_instances: taille de l'espace (par défaut len(sets))

    Raises:
        ValueError: U(x) vide, cible hors de l'espace ou nombre d'ensembles incorrect.
    """

    def __init__(self, sets: Sequence[Iterable[int]], n_instances: Optional[int] = None):
        size = len(sets) if n_instances is None else n_instances
        if len(sets) != size:
            raise ValueError(f"expected {size} perturbation sets, got {len(sets)}")
        normalized = []
        for x, targets in enumerate(sets):
            members = tuple(sorted({int(z) for z in targets}))
            if not members:
                raise ValueError(f"U({x}) must be nonempty")
            if members[0] < 0 or members[-1] >= size:
                raise ValueError(f"U({x}) has a target outside 0..{size - 1}")
            normalized.append(members)
        self.sets: tuple[tuple[int, ...], ...] = tuple(normalized)
        self._arrays = tuple(np.array(members, dtype=np.intp) for members in normalized)
        self._members = tuple(frozenset(members) for members in normalized)

    @classmethod
    def identity(cls, n_instances: int) -> "PerturbationSet":
        return cls([[x] for x in range(n_instances)])

    @classmethod
    def full(cls, n_instances: int) -> "PerturbationSet":
        return cls([range(n_instances) for _ in range(n_instances)])

    @property
    def n_instances(self) -> int:
        return len(self.sets)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, instance: int) -> tuple[int, ...]:
        return self.sets[instance]

    def __eq__(self, other):
        return isinstance(other, PerturbationSet) and self.sets == other.sets

    def __hash__(self):
        return hash(self.sets)

    def array(self, instance: int) -> np.ndarray:
        return self._arrays[instance]

    def contains(self, instance: int, target: int) -> bool:
        return target in self._members[instance]

    @property
    def includes_self(self) -> bool:
        return all(self.contains(x, x) for x in range(self.n_instances))

    def is_within(self, other: "PerturbationSet") -> bool:
        """Vrai si U(x) ⊆ U'(x) pour toute instance x."""
        return self.n_instances == other.n_instances and all(
            mine <= theirs for mine, theirs in zip(self._members, other._members)
        )

    def __repr__(self):
        return f"<PerturbationSet(instances={self.n_instances})>"


@dataclass(frozen=True)
class OracleResponse:
    """
    Réponse d'un oracle d'attaque : certificat de robustesse ou contre-exemple z.
    """
    counterexample: Optional[int] = None

    @classmethod
    def robustly_correct(cls) -> "OracleResponse":
        return cls(None)

    @classmethod
    def perturbation(cls, z: int) -> "OracleResponse":
        return cls(int(z))

    @property
    def is_robust(self) -> bool:
        return self.counterexample is None

    def __repr__(self):
        return "RobustlyCorrect" if self.is_robust else f"Counterexample({self.counterexample})"


class AttackOracle(Protocol):
    """Interface d'un oracle d'attaque parfait O_U."""

    def query(self, predictor: Predictor, example: LabeledExample) -> OracleResponse:
        ...


@dataclass(frozen=True)
class QueryRecord:
    """Une requête journalisée : table de vérité interrogée, exemple, réponse."""
    fingerprint: str
    table: np.ndarray = field(repr=False, compare=False)
    example: LabeledExample
    response: OracleResponse
    stage: str = ""


class QueryLog:
    """
    Journal ordonné des requêtes à l'oracle, propriété d'un seul essai.

    Attributes:
        entries: requêtes dans l'ordre d'émission
    """

    def __init__(self):
        self.entries: list[QueryRecord] = []

    @property
    def total(self) -> int:
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[QueryRecord]:
        return iter(self.entries)

    def record(
        self,
        predictor: Predictor,
        example: LabeledExample,
        response: OracleResponse,
        stage: str = "",
    ) -> None:
        self.entries.append(
            QueryRecord(predictor.fingerprint, predictor.table, example, response, stage)
        )

    def ask(
        self,
        oracle: AttackOracle,
        predictor: Predictor,
        example: LabeledExample,
        stage: str = "",
    ) -> OracleResponse:
        """Interroge l'oracle et journalise la requête."""
        response = oracle.query(predictor, example)
        self.record(predictor, example, response, stage)
        return response

    def extend(self, other: "QueryLog") -> None:
        self.entries.extend(other.entries)

    def counts_by_stage(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.entries:
            counts[entry.stage] = counts.get(entry.stage, 0) + 1
        return counts
