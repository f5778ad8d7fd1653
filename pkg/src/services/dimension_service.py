"""
Calcul exact des dimensions combinatoires (VC, VC duale, Littlestone, seuils).

Recherches exhaustives mémoïsées ; raisonnables tant que |X| ≤ 16 et
|H| ≤ 4096 (plafonds vérifiés par `check_scale`).
"""
import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from src.config import Settings, get_settings
from src.models.base import RobustLearningError
from src.models.universe import FiniteDistribution, HypothesisClass, InstanceSpace, LabeledExample
from src.schemas.dimensions import DimensionReport

logger = logging.getLogger(__name__)

# Arbre de Littlestone explicite : None pour une feuille, sinon (x, sous-arbre +1, sous-arbre -1)
LittlestoneTree = Optional[tuple]


class ScaleCapExceeded(RobustLearningError):
    """Raised when a class or space exceeds the desk-scale caps."""
    pass


def check_scale(hypotheses: HypothesisClass, settings: Optional[Settings] = None) -> None:
    """Vérifie les plafonds |X| et |H|.

    Raises:
        ScaleCapExceeded: Si l'un des plafonds est dépassé.
    """
    settings = settings or get_settings()
    if hypotheses.n_instances > settings.max_instances:
        raise ScaleCapExceeded(
            f"|X| = {hypotheses.n_instances} exceeds max_instances = {settings.max_instances}"
        )
    if hypotheses.n_hypotheses > settings.max_hypotheses:
        raise ScaleCapExceeded(
            f"|H| = {hypotheses.n_hypotheses} exceeds max_hypotheses = {settings.max_hypotheses}"
        )


def _max_shattered(splitters: Sequence[int], universe: int) -> int:
    """
    Plus grand k tel que k séparateurs découpent `universe` en 2^k cellules non vides.

    Les séparateurs et les cellules sont des masques de bits sur les points.
    La recherche est mémoïsée sur la partition courante (indépendante de
    l'ordre de choix des séparateurs).
    """
    candidates = sorted({
        min(cut, universe ^ cut)
        for cut in (splitter & universe for splitter in splitters)
        if cut and cut != universe
    })
    memo: dict[tuple[int, ...], int] = {}

    def depth(cells: tuple[int, ...]) -> int:
        cached = memo.get(cells)
        if cached is not None:
            return cached
        # chaque cellule doit encore être coupée en deux à chaque niveau
        bound = min(cell.bit_count() for cell in cells).bit_length() - 1
        best = 0
        for cut in candidates:
            if best >= bound:
                break
            if all(cell & cut and cell & ~cut for cell in cells):
                refined = tuple(sorted([cell & cut for cell in cells] + [cell & ~cut for cell in cells]))
                best = max(best, 1 + depth(refined))
        memo[cells] = best
        return best

    return depth((universe,))


def _row_instance_masks(hypotheses: HypothesisClass) -> list[int]:
    return [
        sum(1 << int(x) for x in np.flatnonzero(row > 0))
        for row in hypotheses.labels
    ]


def vc_dimension(hypotheses: HypothesisClass) -> int:
    """Dimension VC : plus grand ensemble d'instances pulvérisé par les lignes."""
    return _max_shattered(hypotheses.positive_masks, hypotheses.full_mask)


def dual_vc_dimension(hypotheses: HypothesisClass) -> int:
    """Dimension VC duale : VC de la matrice transposée (g_x(h) = h(x))."""
    return _max_shattered(_row_instance_masks(hypotheses), (1 << hypotheses.n_instances) - 1)


def littlestone_of(hypotheses: HypothesisClass, mask: int) -> int:
    """
    lit(V) pour l'espace de versions V (masque de lignes) ; lit(∅) = -1.

    lit(V) = max sur les x qui coupent V de 1 + min(lit(V^{x,+}), lit(V^{x,-})),
    0 si aucun x ne coupe V. Le cache est partagé par tous les appelants de
    la même classe et protégé par un verrou pour les écritures.
    """
    memo = hypotheses.littlestone_memo
    cached = memo.get(mask)
    if cached is not None:
        return cached
    count = mask.bit_count()
    best = 0
    if count > 1:
        bound = count.bit_length() - 1
        seen: set[int] = set()
        for positive_mask in hypotheses.positive_masks:
            positive = mask & positive_mask
            if not positive or positive == mask or positive in seen:
                continue
            seen.add(positive)
            negative = mask ^ positive
            ceiling = 1 + min(positive.bit_count(), negative.bit_count()).bit_length() - 1
            if ceiling <= best:
                continue
            value = 1 + min(littlestone_of(hypotheses, positive), littlestone_of(hypotheses, negative))
            if value > best:
                best = value
                if best == bound:
                    break
    with hypotheses.memo_lock:
        memo[mask] = best
    return best


def littlestone_dimension(hypotheses: HypothesisClass) -> int:
    """Dimension de Littlestone de la classe entière."""
    return littlestone_of(hypotheses, hypotheses.full_mask)


def _find_tree(labels: np.ndarray, alive: np.ndarray, depth: int) -> tuple[bool, LittlestoneTree]:
    if depth == 0:
        return bool(alive.any()), None
    for x in range(labels.shape[1]):
        plus = alive & (labels[:, x] > 0)
        minus = alive & (labels[:, x] < 0)
        found_plus, left = _find_tree(labels, plus, depth - 1)
        if not found_plus:
            continue
        found_minus, right = _find_tree(labels, minus, depth - 1)
        if found_minus:
            return True, (x, left, right)
    return False, None


def tree_paths(tree: LittlestoneTree) -> list[list[tuple[int, int]]]:
    """Chemins racine → feuille d'un arbre, comme listes de (x, y)."""
    if tree is None:
        return [[]]
    instance, left, right = tree
    return (
        [[(instance, 1)] + path for path in tree_paths(left)]
        + [[(instance, -1)] + path for path in tree_paths(right)]
    )


def verify_tree(hypotheses: HypothesisClass, tree: LittlestoneTree) -> bool:
    """Vrai si chaque chemin de l'arbre est réalisé par une ligne de la classe."""
    labels = hypotheses.labels
    for path in tree_paths(tree):
        if not path:
            continue
        columns = [x for x, _ in path]
        wanted = np.array([y for _, y in path], dtype=np.int8)
        if not np.any(np.all(labels[:, columns] == wanted, axis=1)):
            return False
    return True


def littlestone_tree_depth(hypotheses: HypothesisClass) -> tuple[int, LittlestoneTree]:
    """
    Profondeur de l'arbre de Littlestone le plus profond, par énumération directe.

    Approfondissement itératif sans mémoïsation ; chaque arbre trouvé est
    revérifié chemin par chemin. Réservé aux petites classes (≤ 4 instances).

    Returns:
        tuple: (profondeur, arbre témoin)
    """
    alive = np.ones(hypotheses.n_hypotheses, dtype=bool)
    depth, witness = 0, None
    while True:
        found, tree = _find_tree(hypotheses.labels, alive, depth + 1)
        if not found:
            break
        if not verify_tree(hypotheses, tree):
            raise AssertionError(f"tree of depth {depth + 1} has an unrealizable path")
        depth, witness = depth + 1, tree
    return depth, witness


def threshold_dimension(hypotheses: HypothesisClass) -> int:
    """
    Dimension de seuil : plus longue chaîne x_1..x_k, h_1..h_k avec h_i(x_j) = +1 ssi j ≤ i.

    Recherche en profondeur sur (instances choisies, instances encore
    admissibles) ; parmi les h possibles, seuls ceux qui laissent un
    ensemble admissible maximal sont explorés.
    """
    row_masks = _row_instance_masks(hypotheses)
    column_masks = hypotheses.positive_masks
    memo: dict[tuple[int, int], int] = {}

    def extend(chosen: int, allowed_x: int, allowed_h: int) -> int:
        key = (chosen, allowed_x)
        if key in memo:
            return memo[key]
        best = 0
        remaining = allowed_x
        while remaining:
            low = remaining & -remaining
            remaining ^= low
            x = low.bit_length() - 1
            rows = allowed_h & column_masks[x]
            if not rows:
                continue
            successors = {allowed_x & ~row_masks[h] & ~low for h in hypotheses.rows_of(rows)}
            maximal = [s for s in successors if not any(s != t and s & t == s for t in successors)]
            for nxt in maximal:
                best = max(best, 1 + extend(chosen | low, nxt, rows))
        memo[key] = best
        return best

    return extend(0, (1 << hypotheses.n_instances) - 1, hypotheses.full_mask)


def oracle_query_lower_bound(report: DimensionReport) -> float:
    """log2(Tdim - 1) / 2 si Tdim ≥ 2, sinon 0."""
    if report.threshold < 2:
        return 0.0
    return math.log2(report.threshold - 1) / 2


def dimension_report(hypotheses: HypothesisClass) -> DimensionReport:
    """Calcule les quatre dimensions ; le schéma vérifie leurs relations."""
    vc = vc_dimension(hypotheses)
    dual = dual_vc_dimension(hypotheses)
    lit = littlestone_dimension(hypotheses)
    tdim = threshold_dimension(hypotheses)
    logger.debug("dimensions of %r: vc=%d dual=%d lit=%d tdim=%d", hypotheses, vc, dual, lit, tdim)
    report = DimensionReport(
        instances=hypotheses.n_instances,
        hypotheses=hypotheses.n_hypotheses,
        vc=vc,
        dual_vc=dual,
        littlestone=lit,
        threshold=tdim,
    )
    return report.model_copy(update={"oracle_query_lower_bound": oracle_query_lower_bound(report)})


def make_threshold_class(n: int) -> tuple[InstanceSpace, HypothesisClass]:
    """Classe H_n : h_i(x_j) = +1 ssi j ≤ i (indices 0..n-1).

    Raises:
        ValueError: Si n < 1.
    """
    if n < 1:
        raise ValueError(f"threshold class needs n >= 1, got {n}")
    index = np.arange(n)
    labels = np.where(index[None, :] <= index[:, None], 1, -1)
    return InstanceSpace(n), HypothesisClass(labels)


def make_full_cube(k: int) -> tuple[InstanceSpace, HypothesisClass]:
    """Les 2^k étiquetages de k instances."""
    if k < 1:
        raise ValueError(f"full cube needs k >= 1, got {k}")
    codes = np.arange(2 ** k)[:, None] >> np.arange(k)[None, :]
    return InstanceSpace(k), HypothesisClass(np.where(codes & 1, 1, -1))


def sample_iid(
    distribution: FiniteDistribution,
    m: int,
    seed: Union[int, np.random.Generator, np.random.SeedSequence],
) -> list[LabeledExample]:
    """m tirages indépendants de D, déterministes pour une graine donnée."""
    if m < 0:
        raise ValueError(f"sample size must be >= 0, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if m == 0:
        return []
    examples = distribution.examples
    picks = rng.choice(len(examples), size=m, p=distribution.probabilities)
    return [examples[i] for i in picks]
