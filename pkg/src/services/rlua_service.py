"""
RLUA : pool de CycleRobust sur les sous-ensembles de taille n, discrétisation
pilotée par l'oracle, α-Boost sur l'ensemble discrétisé et sparsification
du vote majoritaire. Plus le boosting de confiance et la réduction du cas
agnostique au cas réalisable.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from src.models.base import Predictor, RobustLearningError
from src.models.perturbation import AttackOracle, QueryLog
from src.models.predictors import ClassMember, ErrorPatternIndex, MajorityVote, PatternPredictor, TableLookup
from src.models.records import (
    BoostRound,
    BoostRun,
    DiscretizedPoint,
    DiscretizedSet,
    HypothesisPool,
)
from src.models.universe import HypothesisClass, LabeledExample
from src.services.compression_service import NonRealizableError, cycle_robust
from src.services.dimension_service import dual_vc_dimension, vc_dimension
from src.services.online_service import LearnerFactory, image_class
from src.services.perturbation_service import ContractViolation

logger = logging.getLogger(__name__)

WEAK_ERROR = 1 / 3
MARGIN = 5 / 9

# cache des sorties de CycleRobust, clé = exemples du sous-ensemble dans l'ordre ;
# les requêtes d'origine sont gardées et recomptées à chaque réutilisation
SubsetCache = dict[tuple[LabeledExample, ...], tuple[Predictor, QueryLog]]


class BoostFailure(RobustLearningError):
    """Raised when α-Boost cannot find a weak hypothesis or misses the final margin."""
    pass


class SparsifyFailure(RobustLearningError):
    """Raised when no sparsified majority is robustly correct on the sample."""
    pass


class ConfidenceBoostFailure(RobustLearningError):
    """Raised when the outer boosting runs out of weak-learner retries."""
    pass


@dataclass(frozen=True)
class RluaConfig:
    """Paramètres de RLUA ; None = valeur par défaut dérivée des dimensions mesurées."""
    subset_size: Optional[int] = None
    rounds: Optional[int] = None
    alpha: Optional[float] = None
    votes: Optional[int] = None
    weak_retry_cap: int = 100
    sparsify_retry_cap: int = 200
    jobs: int = 1


@dataclass
class RluaResult:
    predictor: MajorityVote
    compression: tuple[int, ...]
    pool: HypothesisPool
    dset: DiscretizedSet
    run: BoostRun
    log: QueryLog
    subset_size: int
    votes: int
    sparsify_draws: int
    pool_dual_vc: int
    sauer_envelope: int


@dataclass
class ConfidenceResult:
    predictor: MajorityVote
    weak_errors: list[float] = field(default_factory=list)
    attempts: list[int] = field(default_factory=list)
    log: QueryLog = field(default_factory=QueryLog)


@dataclass
class AgnosticResult:
    predictor: Predictor
    kept: tuple[int, ...]
    degenerate: bool
    confidence: Optional[ConfidenceResult]
    log: QueryLog


def default_rounds(size: int) -> int:
    """T = ⌈112 ln m⌉ (au moins 1)."""
    return max(1, math.ceil(112 * math.log(size))) if size > 1 else 1


def default_alpha(size: int, rounds: int) -> float:
    """α = ½ ln(1 + √(2 ln m / T))."""
    return 0.5 * math.log(1 + math.sqrt(2 * math.log(size) / rounds)) if size > 1 else 0.0


def default_votes(dual_vc: int) -> int:
    """N de la sparsification pour ε = 1/18, δ = 1/3 : max(⌈18²(d* + ln 3)⌉, 9)."""
    return max(math.ceil(18 ** 2 * (dual_vc + math.log(3))), 9)


def default_subset_size(learner_factory: LearnerFactory, m: int) -> int:
    """n = max(3·vc(im(A)), 5), borné par m."""
    return min(m, max(3 * vc_dimension(image_class(learner_factory)), 5))


def sauer_envelope(pool_size: int, dual_vc: int) -> int:
    """Nombre maximal de motifs distincts : 2·Σ_{i ≤ d*} C(|Ĥ|, i) (une famille par étiquette)."""
    return 2 * sum(math.comb(pool_size, i) for i in range(dual_vc + 1))


def sauer_power_bound(pool_size: int, dual_vc: int) -> float:
    """(e|Ĥ|/d*)^{d*}, forme fermée de la borne de Sauer."""
    if dual_vc == 0:
        return 1.0
    return (math.e * pool_size / dual_vc) ** dual_vc


def build_pool(
    sample: Sequence[LabeledExample],
    subset_size: int,
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    log: Optional[QueryLog] = None,
    cache: Optional[SubsetCache] = None,
    jobs: int = 1,
) -> HypothesisPool:
    """
    Lance CycleRobust sur chaque sous-ensemble de taille n (ordre lexicographique).

    Les prédicteurs sont dédoublonnés par table de vérité. Un sous-ensemble
    trouvé dans le cache n'est pas recalculé mais ses requêtes sont rejouées
    dans le journal : le décompte ne dépend pas de l'ordre des essais.

    Raises:
        ValueError: Si n ∉ [1, |S|].
        NonRealizableError: Propagée depuis un sous-ensemble.
    """
    if not 1 <= subset_size <= len(sample):
        raise ValueError(f"subset size must lie in 1..{len(sample)}, got {subset_size}")
    log = QueryLog() if log is None else log
    subsets = list(combinations(range(len(sample)), subset_size))

    def run(subset: tuple[int, ...]) -> tuple[Predictor, QueryLog, bool]:
        examples = tuple(sample[i] for i in subset)
        if cache is not None and examples in cache:
            return (*cache[examples], False)
        sub_log = QueryLog()
        predictor, _, _ = cycle_robust(list(examples), learner_factory(), oracle, log=sub_log, stage="pool")
        return predictor, sub_log, True

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            outputs = list(executor.map(run, subsets))
    else:
        outputs = [run(subset) for subset in subsets]

    members: list[Predictor] = []
    by_table: dict[bytes, int] = {}
    index: dict[tuple[int, ...], int] = {}
    start = log.total
    for subset, (predictor, sub_log, fresh) in zip(subsets, outputs):
        log.extend(sub_log)
        if fresh and cache is not None:
            cache.setdefault(tuple(sample[i] for i in subset), (predictor, sub_log))
        key = predictor.table.tobytes()
        if key not in by_table:
            by_table[key] = len(members)
            members.append(predictor)
        index[subset] = by_table[key]
    logger.debug("pool: %d subsets of size %d, %d distinct predictors", len(subsets), subset_size, len(members))
    return HypothesisPool(members, index, subset_size, log.total - start)


def discretize(
    sample: Sequence[LabeledExample],
    pool: HypothesisPool,
    oracle: AttackOracle,
    log: Optional[QueryLog] = None,
) -> DiscretizedSet:
    """
    Construit Ŝ_U : un représentant par motif d'erreur du pool sur U(x).

    Pour chaque (x, y), une requête sonde (prédicteur faux seulement en x)
    décide si x ∈ U(x) et donc si P démarre à {(x, y)}. Ensuite l'oracle est
    interrogé avec f^y_P jusqu'au certificat ; chaque contre-exemple apporte
    un motif nouveau.

    Raises:
        ValueError: Si le pool est vide.
        ContractViolation: Contre-exemple dont le motif figure déjà dans P.
    """
    if pool.size == 0:
        raise ValueError("discretize needs a nonempty pool")
    log = QueryLog() if log is None else log
    index = ErrorPatternIndex(pool.tables)
    points: dict[bytes, DiscretizedPoint] = {}
    probes = 0
    for origin, example in enumerate(sample):
        x, y = example.instance, example.label
        probe = TableLookup.from_array(np.where(np.arange(index.n_instances) == x, -y, y))
        response = log.ask(oracle, probe, example, "probe")
        probes += 1
        if not response.is_robust and response.counterexample != x:
            raise ContractViolation(f"probe for {example!r} answered {response!r}")
        members = [] if response.is_robust else [x]
        while True:
            pattern_predictor = PatternPredictor(index, y, tuple(members))
            response = log.ask(oracle, pattern_predictor, example, "discretize")
            if response.is_robust:
                break
            z = response.counterexample
            if index.key(z, y) in pattern_predictor.patterns:
                raise ContractViolation(f"counterexample {z} repeats a known pattern for {example!r}")
            members.append(z)
        for z in members:
            key = index.key(z, y)
            if key not in points:
                points[key] = DiscretizedPoint(z, y, key, origin)
    logger.debug("discretized %d examples into %d patterns", len(sample), len(points))
    return DiscretizedSet(list(points.values()), index, probes)


def _project(origins: np.ndarray, subset_size: int, m: int) -> tuple[int, ...]:
    """L_t : indices d'origine distincts, complétés par les plus petits indices libres."""
    chosen = set(int(i) for i in origins)
    for i in range(m):
        if len(chosen) >= subset_size:
            break
        chosen.add(i)
    return tuple(sorted(chosen))


def alpha_boost(
    dset: DiscretizedSet,
    sample: Sequence[LabeledExample],
    pool: HypothesisPool,
    rng: np.random.Generator,
    rounds: Optional[int] = None,
    alpha: Optional[float] = None,
    retry_cap: int = 100,
) -> BoostRun:
    """
    α-Boost sur l'ensemble discrétisé.

    À chaque tour, n points sont tirés selon D_t et projetés sur leurs
    exemples d'origine L_t ; f_t = CycleRobust(L_t), lu dans le pool (même
    entrée, même sortie). Le tirage est refait tant que l'erreur pondérée
    de f_t dépasse 1/3. Les points bien classés sont repondérés par e^{-2α}.

    Raises:
        BoostFailure: Plafond de relances atteint, ou marge finale < 5/9.
    """
    size = dset.size
    if size == 0:
        raise ValueError("alpha_boost needs a nonempty discretized set")
    rounds = rounds or default_rounds(size)
    alpha = default_alpha(size, rounds) if alpha is None else alpha
    shrink = math.exp(-2 * alpha)
    instances = np.array([point.instance for point in dset.points])
    labels = np.array([point.label for point in dset.points])
    origins = np.array([point.origin for point in dset.points])
    correct_by_member = pool.tables[:, instances] == labels[None, :]

    distribution = np.full(size, 1.0 / size)
    history, distributions, correct_rows = [], [], []
    for t in range(rounds):
        for attempt in range(retry_cap):
            draws = rng.choice(size, size=pool.subset_size, p=distribution)
            subset = _project(origins[draws], pool.subset_size, len(sample))
            member = pool.subset_index[subset]
            correct = correct_by_member[member]
            error = float(distribution[~correct].sum())
            if error <= WEAK_ERROR:
                break
        else:
            raise BoostFailure(
                f"round {t + 1}/{rounds}: no weak hypothesis with error <= 1/3 after {retry_cap} draws"
            )
        if attempt >= 10:
            logger.warning("alpha_boost round %d needed %d redraws", t + 1, attempt)
        distributions.append(distribution)
        weighted = np.where(correct, distribution * shrink, distribution)
        normalizer = float(weighted.sum())
        distribution = weighted / normalizer
        history.append(BoostRound(subset, pool.members[member], error, normalizer, attempt))
        correct_rows.append(correct)
    run = BoostRun(history, alpha, np.stack(distributions), np.stack(correct_rows))
    if run.margin < MARGIN - 1e-12:
        raise BoostFailure(f"final vote margin {run.margin:.4f} below 5/9 after {rounds} rounds")
    logger.debug("alpha_boost: %d rounds, alpha=%.4f, margin=%.4f", rounds, alpha, run.margin)
    return run


def sparsify(
    run: BoostRun,
    votes: int,
    sample: Sequence[LabeledExample],
    oracle: AttackOracle,
    rng: np.random.Generator,
    log: Optional[QueryLog] = None,
    retry_cap: int = 200,
) -> tuple[MajorityVote, np.ndarray, int]:
    """
    Tire N indices uniformes dans 1..T et garde la première majorité
    robustement correcte sur tout l'échantillon (vérifiée par l'oracle).

    Returns:
        tuple: (majorité, indices tirés, nombre de tirages)

    Raises:
        SparsifyFailure: Aucun tirage accepté en `retry_cap` essais.
    """
    log = QueryLog() if log is None else log
    for draw in range(1, retry_cap + 1):
        picks = rng.integers(0, run.length, size=votes)
        majority = MajorityVote(tuple(run.rounds[i].predictor for i in picks))
        if all(log.ask(oracle, majority, example, "sparsify").is_robust for example in sample):
            return majority, picks, draw
        logger.debug("sparsify draw %d rejected", draw)
    raise SparsifyFailure(f"no robustly correct majority of {votes} votes in {retry_cap} draws")


def rlua_learn(
    sample: Sequence[LabeledExample],
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    config: RluaConfig,
    rng: np.random.Generator,
    log: Optional[QueryLog] = None,
    cache: Optional[SubsetCache] = None,
) -> RluaResult:
    """
    Pipeline complet : build_pool → discretize → alpha_boost → sparsify.

    La compression renvoyée liste, avec répétitions, les n·N indices
    d'exemples d'origine des votes retenus.
    """
    if not sample:
        raise ValueError("rlua_learn needs a nonempty sample")
    log = QueryLog() if log is None else log
    subset_size = min(config.subset_size or default_subset_size(learner_factory, len(sample)), len(sample))
    pool = build_pool(sample, subset_size, learner_factory, oracle, log, cache, config.jobs)
    dset = discretize(sample, pool, oracle, log)
    pool_dual_vc = dual_vc_dimension(HypothesisClass(pool.tables))
    envelope = sauer_envelope(pool.size, pool_dual_vc)
    run = alpha_boost(dset, sample, pool, rng, config.rounds, config.alpha, config.weak_retry_cap)
    votes = config.votes or default_votes(pool_dual_vc)
    predictor, picks, draws = sparsify(run, votes, sample, oracle, rng, log, config.sparsify_retry_cap)
    compression = tuple(i for pick in picks for i in run.rounds[pick].subset)
    logger.debug(
        "rlua: m=%d n=%d pool=%d dset=%d T=%d N=%d queries=%d",
        len(sample), subset_size, pool.size, dset.size, run.length, votes, log.total,
    )
    return RluaResult(
        predictor=predictor,
        compression=compression,
        pool=pool,
        dset=dset,
        run=run,
        log=log,
        subset_size=subset_size,
        votes=votes,
        sparsify_draws=draws,
        pool_dual_vc=pool_dual_vc,
        sauer_envelope=envelope,
    )


def boost_confidence(
    sample: Sequence[LabeledExample],
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    weak_config: RluaConfig,
    rng: np.random.Generator,
    rounds: Optional[int] = None,
    delta: float = 1 / 3,
    weak_sample_size: Optional[int] = None,
    log: Optional[QueryLog] = None,
    cache: Optional[SubsetCache] = None,
) -> ConfidenceResult:
    """
    α-Boost externe sur les exemples d'entraînement avec la perte robuste.

    Le faible apprenant est RLUA sur m0 = min(|S|, 8) exemples tirés selon
    D_t ; il est relancé jusqu'à ⌈ln(2L/δ)⌉ fois par tour tant que son
    erreur robuste sous D_t (calculée via l'oracle) dépasse 1/3.

    Raises:
        ConfidenceBoostFailure: Relances épuisées ou majorité finale non robuste.
    """
    if not sample:
        raise ValueError("boost_confidence needs a nonempty sample")
    log = QueryLog() if log is None else log
    cache = {} if cache is None else cache
    m = len(sample)
    weak_size = weak_sample_size or min(m, 8)
    rounds = rounds or default_rounds(m)
    alpha = default_alpha(m, rounds)
    shrink = math.exp(-2 * alpha)
    retries = max(1, math.ceil(math.log(2 * rounds / delta)))

    result = ConfidenceResult(predictor=None, log=log)
    hypotheses: list[Predictor] = []
    distribution = np.full(m, 1.0 / m)
    for t in range(rounds):
        for attempt in range(1, retries + 1):
            picks = rng.choice(m, size=weak_size, p=distribution)
            weak_sample = [sample[i] for i in picks]
            try:
                weak = rlua_learn(weak_sample, learner_factory, oracle, weak_config, rng, log, cache)
            except (BoostFailure, SparsifyFailure) as exc:
                logger.warning("weak learner failed in round %d: %s", t + 1, exc)
                continue
            robust = np.array([log.ask(oracle, weak.predictor, ex, "confidence").is_robust for ex in sample])
            error = float(distribution[~robust].sum())
            if error <= WEAK_ERROR:
                break
            logger.warning("round %d: weak robust error %.3f above 1/3, retrying", t + 1, error)
        else:
            raise ConfidenceBoostFailure(f"round {t + 1}: weak learner failed {retries} times")
        hypotheses.append(weak.predictor)
        result.weak_errors.append(error)
        result.attempts.append(attempt)
        weighted = np.where(robust, distribution * shrink, distribution)
        distribution = weighted / weighted.sum()

    result.predictor = MajorityVote(tuple(hypotheses))
    if not all(log.ask(oracle, result.predictor, ex, "confidence").is_robust for ex in sample):
        raise ConfidenceBoostFailure(f"majority of {rounds} weak hypotheses is not robustly correct on S")
    return result


def is_realizable(
    sample: Sequence[LabeledExample],
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    log: Optional[QueryLog] = None,
) -> bool:
    """
    Teste si une ligne de H est robustement correcte sur tout l'échantillon.

    CycleRobust doit réussir, puis une ligne de l'espace de versions final
    doit être certifiée par l'oracle sur chaque exemple. Exact : une ligne
    robustement cohérente survit toujours dans l'espace de versions.
    """
    log = QueryLog() if log is None else log
    learner = learner_factory()
    try:
        cycle_robust(sample, learner, oracle, log=log, stage="realizability")
    except NonRealizableError:
        return False
    hypotheses: HypothesisClass = learner.hypotheses
    for row in hypotheses.rows_of(learner.version_space):
        candidate = ClassMember(hypotheses, row)
        if all(log.ask(oracle, candidate, ex, "certify").is_robust for ex in sample):
            return True
    return False


def agnostic_reduce(
    sample: Sequence[LabeledExample],
    learner_factory: LearnerFactory,
    oracle: AttackOracle,
    weak_config: RluaConfig,
    rng: np.random.Generator,
    rounds: Optional[int] = None,
    delta: float = 1 / 3,
    log: Optional[QueryLog] = None,
) -> AgnosticResult:
    """
    Cherche une plus grande sous-suite réalisable S′ (tailles décroissantes,
    ordre lexicographique) puis lance boost_confidence sur S′.

    S′ = ∅ renvoie la constante +1, signalée comme dégénérée.
    """
    if not sample:
        raise ValueError("agnostic_reduce needs a nonempty sample")
    log = QueryLog() if log is None else log
    kept: tuple[int, ...] = ()
    for size in range(len(sample), 0, -1):
        for subset in combinations(range(len(sample)), size):
            if is_realizable([sample[i] for i in subset], learner_factory, oracle, log):
                kept = subset
                break
        if kept:
            break
    if not kept:
        logger.warning("no realizable subsequence; returning the constant +1 predictor")
        n_instances = learner_factory().n_instances
        return AgnosticResult(TableLookup.constant(n_instances), (), True, None, log)
    sub = [sample[i] for i in kept]
    confidence = boost_confidence(sub, learner_factory, oracle, weak_config, rng, rounds, delta, log=log)
    return AgnosticResult(confidence.predictor, kept, False, confidence, log)
