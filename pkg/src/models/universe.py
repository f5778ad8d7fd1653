"""
Espace d'instances fini, classes d'hypothèses et distributions finies.

Les instances sont des indices denses 0..n-1, les étiquettes valent ±1.
Une classe d'hypothèses est une matrice ±1 (une ligne par hypothèse) ; les
espaces de versions sont représentés par des masques de bits sur les lignes.
"""
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LABELS = (1, -1)


@dataclass(frozen=True)
class InstanceSpace:
    """Espace d'instances X = {0, ..., size-1}."""
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"instance space must be nonempty, got size={self.size}")

    def instances(self) -> range:
        return range(self.size)


@dataclass(frozen=True)
class LabeledExample:
    """Exemple étiqueté (x, y)."""
    instance: int
    label: int

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be +1 or -1, got {self.label}")
        if self.instance < 0:
            raise ValueError(f"instance index must be >= 0, got {self.instance}")

    def check_range(self, space_size: int) -> None:
        if self.instance >= space_size:
            raise ValueError(
                f"instance {self.instance} out of range for a space of size {space_size}"
            )

    def __repr__(self):
        return f"({self.instance}, {self.label:+d})"


class HypothesisClass:
    """
    Classe d'hypothèses finie H ⊆ {±1}^X.

    Attributes:
        labels: matrice int8 (n_hypotheses × n_instances), lecture seule
        positive_masks: pour chaque instance x, masque des lignes avec h(x) = +1
        full_mask: masque de toutes les lignes (espace de versions initial)

    Raises:
        ValueError: matrice vide, valeurs hors ±1 ou lignes dupliquées.
    """

    def __init__(self, labels):
        matrix = np.array(labels, dtype=np.int8)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValueError("hypothesis class needs at least one row and one column")
        if not np.all(np.isin(matrix, LABELS)):
            raise ValueError("hypothesis labels must be +1 or -1")
        _, first_seen, counts = np.unique(matrix, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            duplicated = sorted(int(i) for i, c in zip(first_seen, counts) if c > 1)
            raise ValueError(f"duplicate hypothesis rows (first occurrences: {duplicated})")
        matrix.setflags(write=False)
        self.labels = matrix
        self.full_mask = (1 << matrix.shape[0]) - 1
        self.positive_masks = tuple(
            sum(1 << int(i) for i in np.flatnonzero(matrix[:, x] > 0))
            for x in range(matrix.shape[1])
        )
        # cache partagé des dimensions de Littlestone par espace de versions
        self.littlestone_memo: dict[int, int] = {0: -1}
        # tables de prédiction SOA par espace de versions
        self.prediction_memo: dict[int, np.ndarray] = {}
        self.memo_lock = threading.Lock()

    @classmethod
    def from_rows(cls, rows: Iterable[str]) -> "HypothesisClass":
        """Construit une classe depuis des chaînes '+-+-' (une par hypothèse)."""
        parsed = []
        for row in rows:
            row = row.strip()
            if not row or set(row) - {"+", "-"}:
                raise ValueError(f"invalid hypothesis row {row!r}: expected only '+' and '-'")
            parsed.append([1 if c == "+" else -1 for c in row])
        return cls(parsed)

    @property
    def n_hypotheses(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_instances(self) -> int:
        return int(self.labels.shape[1])

    @property
    def space(self) -> InstanceSpace:
        return InstanceSpace(self.n_instances)

    def row_string(self, row: int) -> str:
        return "".join("+" if v > 0 else "-" for v in self.labels[row])

    def restrict(self, mask: int, instance: int, label: int) -> int:
        """V^{x,y} : lignes de `mask` qui étiquettent x par y."""
        positive = mask & self.positive_masks[instance]
        return positive if label > 0 else mask ^ positive

    def rows_of(self, mask: int) -> list[int]:
        rows = []
        while mask:
            low = mask & -mask
            rows.append(low.bit_length() - 1)
            mask ^= low
        return rows

    def mask_of(self, rows: Iterable[int]) -> int:
        mask = 0
        for row in rows:
            mask |= 1 << row
        return mask

    def consistent_mask(self, examples: Iterable[LabeledExample]) -> int:
        mask = self.full_mask
        for example in examples:
            mask = self.restrict(mask, example.instance, example.label)
        return mask

    def __len__(self):
        return self.n_hypotheses

    def __repr__(self):
        return f"<HypothesisClass(hypotheses={self.n_hypotheses}, instances={self.n_instances})>"


@dataclass(frozen=True)
class FiniteDistribution:
    """
    Distribution finie D sur X × Y.

    Attributes:
        atoms: couples (exemple, probabilité), exemples distincts, somme = 1 à 1e-12 près
    """
    atoms: tuple[tuple[LabeledExample, float], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("distribution needs at least one atom")
        examples = [example for example, _ in self.atoms]
        if len(set(examples)) != len(examples):
            raise ValueError("distribution atoms must be distinct")
        probabilities = [float(p) for _, p in self.atoms]
        if any(p < 0 for p in probabilities):
            raise ValueError("atom probabilities must be nonnegative")
        total = math.fsum(probabilities)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities must sum to 1, got {total!r}")

    @classmethod
    def from_weights(cls, examples: Sequence[LabeledExample], weights: Sequence[float]) -> "FiniteDistribution":
        """Normalise des poids positifs ; le dernier atome absorbe l'erreur d'arrondi."""
        total = math.fsum(weights)
        probabilities = [w / total for w in weights]
        probabilities[-1] = 1.0 - math.fsum(probabilities[:-1])
        return cls(tuple(zip(examples, probabilities)))

    @classmethod
    def uniform(cls, examples: Sequence[LabeledExample]) -> "FiniteDistribution":
        return cls.from_weights(examples, [1.0] * len(examples))

    @property
    def examples(self) -> list[LabeledExample]:
        return [example for example, _ in self.atoms]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=np.float64)

    def check_range(self, space_size: int) -> None:
        for example in self.examples:
            example.check_range(space_size)
