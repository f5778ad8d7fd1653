"""
Apprenants en ligne conservatifs : Standard Optimal Algorithm (SOA) et
harnais de bornes d'erreurs.
"""
import logging
from collections import deque
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from src.models.base import RobustLearningError
from src.models.predictors import OnlineState
from src.models.records import MistakeRecord
from src.models.universe import HypothesisClass, LabeledExample
from src.services.dimension_service import ScaleCapExceeded, littlestone_dimension, littlestone_of

logger = logging.getLogger(__name__)


class ConservativenessViolation(RobustLearningError):
    """Raised when a conservative learner changes its hypothesis on a correct round."""
    pass


class OnlineLearner(Protocol):
    """Interface commune des apprenants en ligne utilisés par les algorithmes."""
    conservative: bool
    n_instances: int

    @property
    def state_key(self) -> int: ...

    @property
    def flagged_empty(self) -> bool: ...

    def predict(self, instance: int) -> int: ...

    def predictor(self) -> OnlineState: ...

    def update(self, example: LabeledExample) -> bool: ...

    def clone(self) -> "OnlineLearner": ...


LearnerFactory = Callable[[], OnlineLearner]


def soa_prediction(hypotheses: HypothesisClass, mask: int, instance: int) -> int:
    """argmax_y lit(V^{x,y}), égalité → +1 (donc +1 sur un espace vide)."""
    positive = hypotheses.restrict(mask, instance, 1)
    negative = mask ^ positive
    return 1 if littlestone_of(hypotheses, positive) >= littlestone_of(hypotheses, negative) else -1


def soa_table(hypotheses: HypothesisClass, mask: int) -> np.ndarray:
    """Table de vérité de SOA pour l'espace de versions `mask` (mise en cache)."""
    cached = hypotheses.prediction_memo.get(mask)
    if cached is not None:
        return cached
    table = np.array(
        [soa_prediction(hypotheses, mask, x) for x in range(hypotheses.n_instances)],
        dtype=np.int8,
    )
    table.setflags(write=False)
    with hypotheses.memo_lock:
        hypotheses.prediction_memo[mask] = table
    return table


class SOALearner:
    """
    Standard Optimal Algorithm sur un espace de versions V.

    En mode conservatif (défaut), V n'est restreint que sur les erreurs ;
    sinon à chaque tour. Un espace de versions vide est signalé et les
    prédictions valent alors +1.

    Args:
        hypotheses: la classe H
        conservative: mise à jour uniquement sur erreur
        version_space: état initial (toute la classe par défaut)
    """

    def __init__(
        self,
        hypotheses: HypothesisClass,
        conservative: bool = True,
        version_space: Optional[int] = None,
    ):
        self.hypotheses = hypotheses
        self.conservative = conservative
        self.n_instances = hypotheses.n_instances
        self.version_space = hypotheses.full_mask if version_space is None else version_space
        self.updates = 0

    @property
    def state_key(self) -> int:
        return self.version_space

    @property
    def flagged_empty(self) -> bool:
        return self.version_space == 0

    @property
    def mistake_bound(self) -> int:
        return littlestone_dimension(self.hypotheses)

    def predict(self, instance: int) -> int:
        return int(soa_table(self.hypotheses, self.version_space)[instance])

    def predictor(self) -> OnlineState:
        return OnlineState(soa_table(self.hypotheses, self.version_space), self.version_space)

    def update(self, example: LabeledExample) -> bool:
        """Révèle (x, y) ; renvoie True si la prédiction était fausse."""
        mistake = self.predict(example.instance) != example.label
        if mistake or not self.conservative:
            restricted = self.hypotheses.restrict(self.version_space, example.instance, example.label)
            if restricted == 0 and self.version_space != 0:
                logger.warning("SOA version space emptied by %r; predicting +1 from now on", example)
            if restricted != self.version_space:
                self.updates += 1
            self.version_space = restricted
        return mistake

    def clone(self) -> "SOALearner":
        twin = SOALearner(self.hypotheses, self.conservative, self.version_space)
        twin.updates = self.updates
        return twin

    def __repr__(self):
        return f"<SOALearner(|V|={self.version_space.bit_count()}, conservative={self.conservative})>"


def soa(hypotheses: HypothesisClass, conservative: bool = True) -> SOALearner:
    """Nouvel apprenant SOA sur la classe entière."""
    return SOALearner(hypotheses, conservative)


def soa_factory(hypotheses: HypothesisClass, conservative: bool = True) -> LearnerFactory:
    return lambda: SOALearner(hypotheses, conservative)


def run_sequence(learner: OnlineLearner, sequence: Sequence[LabeledExample]) -> MistakeRecord:
    """
    Rejoue une séquence en comptant les erreurs.

    Raises:
        ConservativenessViolation: Si un apprenant conservatif change d'hypothèse sur un tour correct.
    """
    mistakes = []
    emptied = False
    for t, example in enumerate(sequence):
        before = learner.predictor()
        mistake = learner.update(example)
        if mistake:
            mistakes.append(t)
        elif learner.conservative and not np.array_equal(before.table, learner.predictor().table):
            raise ConservativenessViolation(f"hypothesis changed on correct round {t}")
        emptied = emptied or learner.flagged_empty
    return MistakeRecord(len(sequence), tuple(mistakes), learner.predictor(), emptied)


def adversarial_mistakes(learner: OnlineLearner, hypotheses: HypothesisClass) -> tuple[int, list[LabeledExample]]:
    """
    Pire séquence réalisable pour un apprenant conservatif, par recherche exhaustive.

    L'adversaire ne joue que des tours d'erreur (un tour correct ne change
    pas un apprenant conservatif) et garde au moins une ligne cohérente.

    Returns:
        tuple: (nombre maximal d'erreurs, séquence qui l'atteint)
    """
    memo: dict[tuple[int, int], tuple[int, list[LabeledExample]]] = {}

    def worst(state: OnlineLearner, consistent: int) -> tuple[int, list[LabeledExample]]:
        key = (state.state_key, consistent)
        if key in memo:
            return memo[key]
        best: tuple[int, list[LabeledExample]] = (0, [])
        for x in range(hypotheses.n_instances):
            label = -state.predict(x)
            remaining = hypotheses.restrict(consistent, x, label)
            if not remaining:
                continue
            child = state.clone()
            child.update(LabeledExample(x, label))
            count, tail = worst(child, remaining)
            if count + 1 > best[0]:
                best = (count + 1, [LabeledExample(x, label)] + tail)
        memo[key] = best
        return best

    return worst(learner.clone(), hypotheses.full_mask)


def image_class(learner_factory: LearnerFactory, cap: int = 100_000) -> HypothesisClass:
    """
    Classe image im(A) : tables distinctes des états atteignables par mises à jour sur erreur.

    Parcours en largeur depuis l'état initial ; les états à espace de
    versions vide sont exclus.

    Raises:
        ScaleCapExceeded: Si plus de `cap` états sont atteignables.
    """
    start = learner_factory()
    seen = {start.state_key}
    queue = deque([start])
    tables: dict[bytes, np.ndarray] = {}
    while queue:
        state = queue.popleft()
        table = state.predictor().table
        tables.setdefault(table.tobytes(), table)
        for x in range(state.n_instances):
            label = -state.predict(x)
            child = state.clone()
            child.update(LabeledExample(x, label))
            if child.flagged_empty or child.state_key in seen:
                continue
            seen.add(child.state_key)
            if len(seen) > cap:
                raise ScaleCapExceeded(f"image class exploration exceeded {cap} states")
            queue.append(child)
    logger.debug("image class: %d states, %d distinct tables", len(seen), len(tables))
    return HypothesisClass(np.stack(list(tables.values())))
