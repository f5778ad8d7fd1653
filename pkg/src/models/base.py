"""
Base commune des prédicteurs et des erreurs métier.
"""
import hashlib
from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np


class RobustLearningError(Exception):
    """Base de toutes les erreurs métier (mappées en code 2 par la CLI, 400 par l'API)."""


def table_fingerprint(table: np.ndarray, *extra: bytes) -> str:
    """Empreinte courte d'une table de vérité ±1 (plus d'éventuels octets additionnels)."""
    digest = hashlib.sha256(np.asarray(table, dtype=np.int8).tobytes())
    for chunk in extra:
        digest.update(chunk)
    return digest.hexdigest()[:16]


class Predictor(ABC):
    """
    Règle de classification totale sur l'espace d'instances.

    Chaque variante calcule une seule fois sa table de vérité (vecteur ±1
    indexé par instance) ; l'évaluation devient un accès tableau et deux
    prédicteurs de même table sont interchangeables pour l'oracle.

    Attributes:
        table: table de vérité en lecture seule (int8, valeurs ±1)
        fingerprint: hash de la table, utilisé dans les QueryLog
    """

    kind: str = "predictor"

    @abstractmethod
    def _compute_table(self) -> np.ndarray:
        """Calcule la table de vérité complète."""

    @cached_property
    def table(self) -> np.ndarray:
        table = np.array(self._compute_table(), dtype=np.int8)
        table.setflags(write=False)
        return table

    @cached_property
    def fingerprint(self) -> str:
        return table_fingerprint(self.table)

    @property
    def size(self) -> int:
        return int(self.table.shape[0])

    def __call__(self, instance: int) -> int:
        return int(self.table[instance])

    def same_labels(self, other: "Predictor") -> bool:
        return bool(np.array_equal(self.table, other.table))

    def __repr__(self):
        return f"<{type(self).__name__}(fingerprint={self.fingerprint})>"
