"""
Variantes concrètes de prédicteurs.

Toutes matérialisent leur table de vérité ; les règles d'égalité des votes
tranchent systématiquement en faveur de +1.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.models.base import Predictor, table_fingerprint
from src.models.universe import HypothesisClass, LabeledExample

# écart relatif en dessous duquel deux masses de vote sont considérées égales
VOTE_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False, repr=False)
class ClassMember(Predictor):
    """Ligne `row` de la classe d'hypothèses."""
    hypotheses: HypothesisClass
    row: int
    kind = "class-member"

    def _compute_table(self) -> np.ndarray:
        return self.hypotheses.labels[self.row]


@dataclass(frozen=True, eq=False, repr=False)
class TableLookup(Predictor):
    """Prédicteur défini par un vecteur ±1 explicite."""
    values: tuple[int, ...]
    kind = "table"

    def __post_init__(self):
        if not self.values or any(v not in (1, -1) for v in self.values):
            raise ValueError("table values must be a nonempty sequence of +1/-1")

    @classmethod
    def from_array(cls, values) -> "TableLookup":
        return cls(tuple(int(v) for v in np.asarray(values).ravel()))

    @classmethod
    def constant(cls, n_instances: int, label: int = 1) -> "TableLookup":
        return cls((label,) * n_instances)

    def _compute_table(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int8)


@dataclass(frozen=True, eq=False, repr=False)
class MajorityVote(Predictor):
    """MAJ(f_1, ..., f_k) non pondéré, égalité → +1."""
    members: tuple[Predictor, ...]
    kind = "majority"

    def __post_init__(self):
        if not self.members:
            raise ValueError("majority vote needs at least one member")

    def vote_fractions(self) -> np.ndarray:
        """Fraction des membres votant +1 sur chaque instance."""
        stacked = np.stack([member.table for member in self.members])
        return np.mean(stacked > 0, axis=0)

    def _compute_table(self) -> np.ndarray:
        votes = np.sum(np.stack([member.table for member in self.members]).astype(np.int64), axis=0)
        return np.where(votes >= 0, 1, -1)


def weighted_vote(tables: np.ndarray, log_weights: np.ndarray) -> np.ndarray:
    """
    Vote pondéré ±1 colonne par colonne à partir de log-poids.

    Args:
        tables: matrice (k × n) de tables ±1
        log_weights: vecteur (k,) de log-poids, -inf autorisé

    Returns:
        np.ndarray: table ±1 ; égalité (à VOTE_TIE_TOLERANCE près) → +1
    """
    log_weights = np.asarray(log_weights, dtype=np.float64)
    peak = np.max(log_weights) if log_weights.size else -np.inf
    if not np.isfinite(peak):
        return np.ones(tables.shape[1], dtype=np.int8)
    weights = np.exp(log_weights - peak)
    positive = weights @ (tables > 0)
    negative = weights @ (tables < 0)
    slack = VOTE_TIE_TOLERANCE * (positive + negative)
    return np.where(positive + slack >= negative, 1, -1).astype(np.int8)


@dataclass(frozen=True, eq=False, repr=False)
class WeightedMajority(Predictor):
    """
    Majorité pondérée sur un ensemble de tables (lignes de H ou experts).

    L'empreinte inclut les poids : deux états de poids différents restent
    distinguables dans un QueryLog même si leurs tables coïncident.
    """
    tables: np.ndarray
    log_weights: np.ndarray
    kind = "weighted-majority"

    def _compute_table(self) -> np.ndarray:
        return weighted_vote(self.tables, self.log_weights)

    @property
    def fingerprint(self) -> str:
        weights = np.ascontiguousarray(self.log_weights, dtype=np.float64)
        return table_fingerprint(self.table, weights.tobytes())


class ErrorPatternIndex:
    """
    Motifs d'erreur g_{(z,y)}(h) = 1[h(z) ≠ y] d'un pool de prédicteurs.

    Pour chaque instance z et chaque étiquette y, le motif (vecteur de bits
    sur les membres du pool) est précalculé et empaqueté en octets.

    Args:
        pool_tables: matrice (|pool| × n) des tables du pool
    """

    def __init__(self, pool_tables: np.ndarray):
        tables = np.asarray(pool_tables, dtype=np.int8)
        self.pool_size = int(tables.shape[0])
        self.n_instances = int(tables.shape[1])
        self._keys = {
            label: tuple(np.packbits(tables[:, z] != label).tobytes() for z in range(self.n_instances))
            for label in (1, -1)
        }

    def key(self, instance: int, label: int) -> bytes:
        return self._keys[label][instance]

    def keys(self, label: int) -> tuple[bytes, ...]:
        return self._keys[label]

    def bits(self, instance: int, label: int) -> str:
        """Motif lisible, un caractère '0'/'1' par membre du pool."""
        unpacked = np.unpackbits(np.frombuffer(self.key(instance, label), dtype=np.uint8))
        return "".join(str(int(b)) for b in unpacked[: self.pool_size])


@dataclass(frozen=True, eq=False, repr=False)
class PatternPredictor(Predictor):
    """
    f^y_P : prédit y sur z' ssi le motif d'erreur de (z', y) figure déjà dans P.

    Attributes:
        index: motifs précalculés du pool de référence
        label: étiquette y commune aux points de P
        points: instances z de P (exemples (z, y))
    """
    index: ErrorPatternIndex
    label: int
    points: tuple[int, ...]
    kind = "pattern"

    @property
    def patterns(self) -> frozenset[bytes]:
        return frozenset(self.index.key(z, self.label) for z in self.points)

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(z, self.label) for z in self.points]

    def _compute_table(self) -> np.ndarray:
        known = self.patterns
        return np.array(
            [self.label if key in known else -self.label for key in self.index.keys(self.label)],
            dtype=np.int8,
        )


@dataclass(frozen=True, eq=False, repr=False)
class OnlineState(Predictor):
    """Hypothèse figée d'un apprenant en ligne (table + clé d'état)."""
    values: np.ndarray
    state_key: int
    kind = "online-state"

    def _compute_table(self) -> np.ndarray:
        return self.values


def stack_tables(predictors: Sequence[Predictor]) -> np.ndarray:
    return np.stack([predictor.table for predictor in predictors])
