"""
Weighted Majority robuste : sur une classe finie, sur la famille d'experts
simulant SOA, et conversion en ligne → batch.

Les poids sont tenus en log ; un vote à égalité prédit +1.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence, Union

import numpy as np

from src.models.base import Predictor, RobustLearningError
from src.models.enums import ExpertMode
from src.models.perturbation import AttackOracle, PerturbationSet, QueryLog
from src.models.predictors import WeightedMajority
from src.models.records import ExpertSpec, WeightState
from src.models.universe import FiniteDistribution, HypothesisClass, LabeledExample
from src.services.dimension_service import littlestone_dimension, sample_iid
from src.services.online_service import soa_table
from src.services.perturbation_service import robust_loss_matrix, robust_risk

logger = logging.getLogger(__name__)

# tolérance relative sur la contraction du poids total (arrondis flottants)
CONTRACTION_TOLERANCE = 1e-9


class ExpertFamilyTooLarge(RobustLearningError):
    """Raised when the expert family (or its live groups) exceeds the configured cap."""
    pass


def regret_constants(eta: float) -> tuple[float, float]:
    """a_η = ln(1/η) / ln(2/(1+η)), b_η = 1 / ln(2/(1+η)).

    Raises:
        ValueError: Si η ∉ (0, 1).
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    denominator = math.log(2 / (1 + eta))
    return math.log(1 / eta) / denominator, 1 / denominator


def default_eta(n_experts: int, horizon: int) -> float:
    """1 - η = min(max(2 ln N / T, 1/T), 1/2) ; le plancher 1/T couvre N = 1."""
    gap = min(max(2 * math.log(n_experts) / horizon, 1 / horizon), 0.5)
    return 1 - gap


def finite_wm_bound(eta: float, opt: float, n_experts: int) -> float:
    """a_η·OPT + b_η·ln N."""
    a, b = regret_constants(eta)
    return a * opt + b * math.log(n_experts)


def expert_regret_bound(opt: float, family_size: int) -> float:
    """2·OPT + 4√(OPT ln|Experts|)."""
    return 2 * opt + 4 * math.sqrt(opt * math.log(family_size))


def stream_opt(hypotheses: HypothesisClass, stream: Sequence[LabeledExample], u: PerturbationSet) -> tuple[int, int]:
    """OPT = min sur les lignes de Σ_t perte robuste ; renvoie (OPT, ligne)."""
    totals = robust_loss_matrix(hypotheses, stream, u).sum(axis=1)
    best = int(np.argmin(totals))
    return int(totals[best]), best


def expert_family_size(littlestone: int, horizon: int) -> int:
    """|Experts| = Σ_{L ≤ lit} C(T, L), exact."""
    return sum(math.comb(horizon, size) for size in range(littlestone + 1))


def make_expert_family(littlestone: int, horizon: int, cap: int = 2_000_000) -> list[ExpertSpec]:
    """
    Tous les Expert(i_1 < ... < i_L), L ≤ lit, i_j ∈ 1..T.

    Raises:
        ValueError: Si T < 1.
        ExpertFamilyTooLarge: Si la famille dépasse `cap`.
    """
    if horizon < 1:
        raise ValueError(f"expert horizon must be >= 1, got {horizon}")
    size = expert_family_size(littlestone, horizon)
    if size > cap:
        raise ExpertFamilyTooLarge(
            f"{size} experts for lit={littlestone}, T={horizon} exceed the cap {cap}; shrink T"
        )
    return [
        ExpertSpec(flips, horizon)
        for count in range(littlestone + 1)
        for flips in combinations(range(1, horizon + 1), count)
    ]


class ExpertRunner:
    """
    État incrémental d'un expert : espace de versions V et tour courant.

    L'expert avance uniquement sur les tours d'erreur du vote (la suite des
    contre-exemples) et restreint V par sa propre prédiction.
    """

    def __init__(self, spec: ExpertSpec, hypotheses: HypothesisClass):
        self.spec = spec
        self.hypotheses = hypotheses
        self.flips = frozenset(spec.flips)
        self.version_space = hypotheses.full_mask
        self.round = 1

    def table(self) -> np.ndarray:
        """Prédictions de l'expert au tour courant, sur toutes les instances."""
        base = soa_table(self.hypotheses, self.version_space)
        return -base if self.round in self.flips else base

    def predict(self, instance: int) -> int:
        return int(self.table()[instance])

    def advance(self, instance: int) -> None:
        prediction = self.predict(instance)
        self.version_space = self.hypotheses.restrict(self.version_space, instance, prediction)
        self.round += 1


def expert_predict(
    spec: ExpertSpec,
    hypotheses: HypothesisClass,
    history: Sequence[tuple[int, int]],
    t: int,
    instance: int,
) -> int:
    """
    Prédiction de Expert(spec) au tour t sur x, après l'historique des contre-exemples.

    Les étiquettes révélées ne sont pas utilisées : V_{s+1} = V_s^{ŷ_s}.
    """
    if t != len(history) + 1:
        raise ValueError(f"round {t} does not follow a history of length {len(history)}")
    runner = ExpertRunner(spec, hypotheses)
    for z, _ in history:
        runner.advance(z)
    return runner.predict(instance)


@dataclass
class WMRun:
    """Trace d'une exécution de Weighted Majority."""
    state: WeightState
    predictors: list[Predictor] = field(default_factory=list)
    mistake_rounds: list[int] = field(default_factory=list)
    contraction_ratios: list[float] = field(default_factory=list)
    log: QueryLog = field(default_factory=QueryLog)
    family_size: int = 0
    best_log_weight: Optional[float] = None

    @property
    def mistakes(self) -> int:
        return len(self.mistake_rounds)


def _log_total(log_weights: np.ndarray) -> float:
    return float(np.logaddexp.reduce(log_weights)) if log_weights.size else float("-inf")


def wm_finite(
    hypotheses: HypothesisClass,
    stream: Sequence[LabeledExample],
    eta: float,
    oracle: AttackOracle,
    log: Optional[QueryLog] = None,
) -> WMRun:
    """
    Weighted Majority sur les lignes de H avec l'oracle d'attaque.

    À chaque tour, l'oracle est interrogé avec la majorité pondérée
    courante ; sur un contre-exemple z_t, chaque ligne h avec h(z_t) ≠ y_t
    est multipliée par η.

    Raises:
        ValueError: Si η ∉ [0, 1).
    """
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    log = QueryLog() if log is None else log
    ln_eta = math.log(eta) if eta > 0 else -math.inf
    log_weights = np.zeros(hypotheses.n_hypotheses)
    run = WMRun(WeightState(log_weights, eta), log=log, family_size=hypotheses.n_hypotheses)
    predictor = WeightedMajority(hypotheses.labels, log_weights.copy())
    for t, example in enumerate(stream):
        run.predictors.append(predictor)
        response = log.ask(oracle, predictor, example, "wm")
        if response.is_robust:
            continue
        before = _log_total(log_weights)
        erring = hypotheses.labels[:, response.counterexample] != example.label
        log_weights[erring] += ln_eta
        run.mistake_rounds.append(t)
        run.contraction_ratios.append(math.exp(_log_total(log_weights) - before))
        predictor = WeightedMajority(hypotheses.labels, log_weights.copy())
    run.state = WeightState(log_weights, eta, rounds=len(stream), mistakes=run.mistakes)
    run.best_log_weight = float(np.max(log_weights))
    return run


class _GroupedExperts:
    """
    Famille d'experts agrégée par (V, nombre d'inversions déjà faites).

    Au tour s (1-indexé) de la suite des contre-exemples, un groupe dont les
    experts ont encore R = lit - j inversions possibles se partage entre
    « inverse au tour s » (Σ_{i ≤ R-1} C(T-s, i) complétions) et « n'inverse
    pas » (Σ_{i ≤ R} C(T-s, i)). Les poids sont uniformes sur les
    complétions d'un même passé, donc le partage est exact.
    """

    def __init__(self, hypotheses: HypothesisClass, littlestone: int, horizon: int, group_cap: int):
        self.hypotheses = hypotheses
        self.littlestone = littlestone
        self.horizon = horizon
        self.group_cap = group_cap
        self.round = 1
        self.groups: dict[tuple[int, int], float] = {
            (hypotheses.full_mask, 0): math.log(expert_family_size(littlestone, horizon))
        }

    def _split(self, used: int) -> tuple[float, float]:
        remaining_rounds = self.horizon - self.round
        if remaining_rounds < 0:
            return -math.inf, 0.0
        budget = self.littlestone - used
        flip = sum(math.comb(remaining_rounds, i) for i in range(budget))
        keep = sum(math.comb(remaining_rounds, i) for i in range(budget + 1))
        total = flip + keep
        return (math.log(flip / total) if flip else -math.inf), math.log(keep / total)

    def components(self) -> tuple[list[np.ndarray], list[float], list[tuple[int, int, int]]]:
        """Tables, log-poids et (V, j, inversion ?) de chaque sous-groupe."""
        tables, weights, keys = [], [], []
        for (mask, used), log_weight in self.groups.items():
            flip_share, keep_share = self._split(used)
            base = soa_table(self.hypotheses, mask)
            tables.append(base)
            weights.append(log_weight + keep_share)
            keys.append((mask, used, 0))
            if flip_share > -math.inf:
                tables.append(-base)
                weights.append(log_weight + flip_share)
                keys.append((mask, used, 1))
        return tables, weights, keys

    def update(self, instance: int, label: int, ln_eta: float) -> None:
        tables, weights, keys = self.components()
        merged: dict[tuple[int, int], float] = {}
        for table, log_weight, (mask, used, flipped) in zip(tables, weights, keys):
            prediction = int(table[instance])
            if prediction != label:
                log_weight += ln_eta
            nxt = (self.hypotheses.restrict(mask, instance, prediction), used + flipped)
            merged[nxt] = np.logaddexp(merged[nxt], log_weight) if nxt in merged else log_weight
        if len(merged) > self.group_cap:
            raise ExpertFamilyTooLarge(f"{len(merged)} live expert groups exceed the cap {self.group_cap}")
        self.groups = merged
        self.round += 1


def wm_experts(
    hypotheses: HypothesisClass,
    stream: Sequence[LabeledExample],
    oracle: AttackOracle,
    horizon: Optional[int] = None,
    eta: Optional[float] = None,
    mode: ExpertMode = ExpertMode.GROUPED,
    family_cap: int = 2_000_000,
    group_cap: int = 200_000,
    log: Optional[QueryLog] = None,
) -> WMRun:
    """
    Weighted Majority sur Experts_H (experts simulant SOA avec ≤ lit inversions).

    Le vote combine les tables courantes des experts ; ceux-ci n'avancent
    que sur les tours d'erreur du vote. Le mode `materialized` tient un
    poids par ExpertSpec, le mode `grouped` agrège les experts de même état.

    Raises:
        ExpertFamilyTooLarge: Famille ou groupes au-delà des plafonds.
    """
    horizon = horizon or max(1, len(stream))
    littlestone = littlestone_dimension(hypotheses)
    size = expert_family_size(littlestone, horizon)
    eta = default_eta(size, horizon) if eta is None else eta
    ln_eta = math.log(eta) if eta > 0 else -math.inf
    log = QueryLog() if log is None else log
    run = WMRun(WeightState(np.zeros(0), eta), log=log, family_size=size)

    if mode == ExpertMode.MATERIALIZED:
        runners = [ExpertRunner(spec, hypotheses) for spec in make_expert_family(littlestone, horizon, family_cap)]
        log_weights = np.zeros(len(runners))

        def current() -> WeightedMajority:
            return WeightedMajority(np.stack([runner.table() for runner in runners]), log_weights.copy())
    else:
        grouped = _GroupedExperts(hypotheses, littlestone, horizon, group_cap)

        def current() -> WeightedMajority:
            tables, weights, _ = grouped.components()
            return WeightedMajority(np.stack(tables), np.array(weights))

    predictor = current()
    for t, example in enumerate(stream):
        run.predictors.append(predictor)
        response = log.ask(oracle, predictor, example, "wm-experts")
        if response.is_robust:
            continue
        z = response.counterexample
        if run.mistakes >= horizon:
            raise ExpertFamilyTooLarge(f"more than T={horizon} robust mistakes; raise the horizon")
        before = _log_total(predictor.log_weights)
        if mode == ExpertMode.MATERIALIZED:
            erring = np.array([runner.predict(z) != example.label for runner in runners])
            log_weights[erring] += ln_eta
            for runner in runners:
                runner.advance(z)
        else:
            grouped.update(z, example.label, ln_eta)
        run.mistake_rounds.append(t)
        predictor = current()
        run.contraction_ratios.append(math.exp(_log_total(predictor.log_weights) - before))

    final_weights = log_weights if mode == ExpertMode.MATERIALIZED else np.array(list(grouped.groups.values()))
    run.state = WeightState(final_weights, eta, rounds=len(stream), mistakes=run.mistakes)
    if mode == ExpertMode.MATERIALIZED:
        run.best_log_weight = float(np.max(log_weights))
    logger.debug("wm_experts(%s): %d rounds, %d mistakes, family=%d", mode.value, len(stream), run.mistakes, size)
    return run


@dataclass
class MixtureResult:
    """Mélange uniforme des m prédicteurs ĥ_0..ĥ_{m-1} et son risque exact."""
    predictors: list[Predictor]
    risk: float
    run: WMRun


def online_to_batch(
    hypotheses: HypothesisClass,
    distribution: FiniteDistribution,
    u: PerturbationSet,
    oracle: AttackOracle,
    m: int,
    seed: Union[int, np.random.Generator],
    eta: Optional[float] = None,
    mode: ExpertMode = ExpertMode.GROUPED,
    group_cap: int = 200_000,
) -> MixtureResult:
    """
    WM sur experts le long d'un flux iid de taille m ; risque robuste exact
    du mélange uniforme des prédicteurs de chaque préfixe.

    Raises:
        ValueError: Si m < 1.
    """
    if m < 1:
        raise ValueError(f"online_to_batch needs m >= 1, got {m}")
    stream = sample_iid(distribution, m, seed)
    run = wm_experts(hypotheses, stream, oracle, horizon=m, eta=eta, mode=mode, group_cap=group_cap)
    risks: dict[int, float] = {}
    total = 0.0
    for predictor in run.predictors:
        key = id(predictor)
        if key not in risks:
            risks[key] = robust_risk(predictor, distribution, u)
        total += risks[key]
    return MixtureResult(run.predictors, total / m, run)


def agnostic_sample_size(littlestone: int, epsilon: float, delta: float) -> int:
    """
    Plus petit m avec 4√(ln|Experts_H(m)|/m) + 2√(2 ln(1/δ)/m) ≤ ε.

    Recherche par doublement puis dichotomie sur la forme fermée.
    """
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError("epsilon and delta must lie in (0, 1)")

    def fits(m: int) -> bool:
        family = math.log(expert_family_size(littlestone, m))
        return 4 * math.sqrt(family / m) + 2 * math.sqrt(2 * math.log(1 / delta) / m) <= epsilon

    high = 1
    while not fits(high):
        high *= 2
    low = high // 2
    while high - low > 1:
        middle = (low + high) // 2
        if fits(middle):
            high = middle
        else:
            low = middle
    return high


def finite_sample_size(n_hypotheses: int, epsilon: float, delta: float) -> int:
    """Variante classe finie : ln|H| à la place de ln|Experts_H|."""
    budget = 4 * math.sqrt(math.log(max(n_hypotheses, 1))) + 2 * math.sqrt(2 * math.log(1 / delta))
    return max(1, math.ceil((budget / epsilon) ** 2))
