"""
Jeux d'attaque : jeu en ligne contre un attaquant, adversaire de borne
inférieure sur les seuils, attaquants imparfaits et apprenant « plus long
survivant ».
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Optional, Protocol, Sequence, Union

import numpy as np

from src.models.base import Predictor, RobustLearningError
from src.models.enums import AttackerKind, StrategyKind
from src.models.perturbation import AttackOracle, OracleResponse, PerturbationSet, QueryLog
from src.models.predictors import TableLookup
from src.models.records import GameRound, GameTranscript, ThresholdGameState
from src.models.universe import FiniteDistribution, HypothesisClass, LabeledExample
from src.services.online_service import OnlineLearner, soa_table
from src.services.perturbation_service import CanonicalOracle, ContractViolation

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, np.random.SeedSequence]


class NonTerminatingError(RobustLearningError):
    """Raised when a query strategy exceeds its round cap in the threshold game."""
    pass


class SurvivorFailure(RobustLearningError):
    """Raised when no predictor survives the required streak within the round cap."""
    pass


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Attaquants
# ---------------------------------------------------------------------------

class Attacker(ABC):
    """
    Attaquant stationnaire : (prédicteur, exemple, rng) ↦ instance z.

    Attributes:
        kind: nom court
        membership_honest: l'attaquant s'engage à renvoyer z ∈ U(x)
    """

    kind: str = "attacker"
    membership_honest: bool = True

    def __init__(self, u: PerturbationSet):
        self.u = u

    @abstractmethod
    def attack(self, predictor: Predictor, example: LabeledExample, rng: np.random.Generator) -> int:
        ...

    def outcomes(self, predictor: Predictor, example: LabeledExample) -> Optional[list[tuple[int, float]]]:
        """Loi de z sur cet exemple, ou None si l'attaquant ne l'expose pas."""
        return None

    def checked_attack(self, predictor: Predictor, example: LabeledExample, rng: np.random.Generator) -> int:
        """
        Raises:
            ContractViolation: attaquant honnête qui sort de U(x).
        """
        z = int(self.attack(predictor, example, rng))
        if self.membership_honest and not self.u.contains(example.instance, z):
            raise ContractViolation(f"{self.kind} attacker returned {z} outside U({example.instance})")
        return z

    def __repr__(self):
        return f"<{type(self).__name__}(kind={self.kind})>"


class IdentityAttacker(Attacker):
    """Attaquant nul : renvoie toujours x."""
    kind = AttackerKind.IDENTITY.value

    def __init__(self, u: PerturbationSet):
        super().__init__(u)
        self.membership_honest = u.includes_self

    def attack(self, predictor, example, rng):
        return example.instance

    def outcomes(self, predictor, example):
        return [(example.instance, 1.0)]


class UniformAttacker(Attacker):
    """z uniforme dans U(x), sans regarder le prédicteur."""
    kind = AttackerKind.UNIFORM.value

    def attack(self, predictor, example, rng):
        members = self.u[example.instance]
        return members[int(rng.integers(len(members)))]

    def outcomes(self, predictor, example):
        members = self.u[example.instance]
        return [(z, 1.0 / len(members)) for z in members]


class GreedyAttacker(Attacker):
    """
    Premier z mal classé dans U(x) (ordre croissant ou décroissant) ; à
    défaut x si x ∈ U(x), sinon le premier élément parcouru.
    """

    def __init__(self, u: PerturbationSet, descending: bool = False):
        super().__init__(u)
        self.descending = descending
        self.kind = (AttackerKind.GREEDY_LAST if descending else AttackerKind.GREEDY).value

    def attack(self, predictor, example, rng=None):
        members = self.u.array(example.instance)
        if self.descending:
            members = members[::-1]
        wrong = np.flatnonzero(predictor.table[members] != example.label)
        if wrong.size:
            return int(members[wrong[0]])
        if self.u.contains(example.instance, example.instance):
            return example.instance
        return int(members[0])

    def outcomes(self, predictor, example):
        return [(self.attack(predictor, example), 1.0)]


class EpsBlindAttacker(Attacker):
    """Glouton avec probabilité 1 - p, identité avec probabilité p."""
    kind = AttackerKind.EPS_BLIND.value

    def __init__(self, u: PerturbationSet, blindness: float = 0.1):
        if not 0 <= blindness <= 1:
            raise ValueError(f"blindness must lie in [0, 1], got {blindness}")
        super().__init__(u)
        self.blindness = blindness
        self.greedy = GreedyAttacker(u)
        self.membership_honest = u.includes_self or blindness == 0

    def attack(self, predictor, example, rng):
        if rng.random() < self.blindness:
            return example.instance
        return self.greedy.attack(predictor, example)

    def outcomes(self, predictor, example):
        mass: dict[int, float] = {}
        for z, p in ((example.instance, self.blindness), (self.greedy.attack(predictor, example), 1 - self.blindness)):
            mass[z] = mass.get(z, 0.0) + p
        return [(z, p) for z, p in mass.items() if p > 0]


class OracleAttacker(Attacker):
    """Adaptateur : un oracle parfait utilisé comme attaquant (x si certificat)."""
    kind = "oracle"

    def __init__(self, oracle: AttackOracle, u: PerturbationSet):
        super().__init__(u)
        self.oracle = oracle

    def attack(self, predictor, example, rng=None):
        response = self.oracle.query(predictor, example)
        if response.is_robust:
            return example.instance if self.u.contains(example.instance, example.instance) else self.u[example.instance][0]
        return response.counterexample

    def outcomes(self, predictor, example):
        return [(self.attack(predictor, example), 1.0)]


def make_attacker(kind: AttackerKind, u: PerturbationSet, blindness: float = 0.1) -> Attacker:
    """Fabrique l'un des attaquants livrés."""
    if kind == AttackerKind.IDENTITY:
        return IdentityAttacker(u)
    if kind == AttackerKind.UNIFORM:
        return UniformAttacker(u)
    if kind == AttackerKind.GREEDY:
        return GreedyAttacker(u)
    if kind == AttackerKind.GREEDY_LAST:
        return GreedyAttacker(u, descending=True)
    if kind == AttackerKind.EPS_BLIND:
        return EpsBlindAttacker(u, blindness)
    raise ValueError(f"unknown attacker kind {kind!r}")


# ---------------------------------------------------------------------------
# Jeu d'attaque en ligne
# ---------------------------------------------------------------------------

def iid_stream(distribution: FiniteDistribution, rng: np.random.Generator) -> Iterator[LabeledExample]:
    """Flux infini de tirages iid de D."""
    examples = distribution.examples
    probabilities = distribution.probabilities
    while True:
        yield examples[int(rng.choice(len(examples), p=probabilities))]


def attack_game(
    learner: OnlineLearner,
    attacker: Attacker,
    distribution: FiniteDistribution,
    u: PerturbationSet,
    rounds: int,
    seed: Seed,
    pretrain: int = 0,
) -> GameTranscript:
    """
    Jeu d'attaque en ligne : à chaque tour (x, y) ~ D, l'attaquant choisit
    z, l'apprenant prédit sur z puis reçoit (z, y). L'apprenant ne voit
    jamais x.

    Args:
        pretrain: exemples propres (x, y) donnés à l'apprenant avant le jeu

    Raises:
        ContractViolation: attaquant honnête renvoyant z ∉ U(x).
    """
    if attacker.u != u:
        raise ValueError("attacker and game must share the same perturbation set")
    draw_rng, attack_rng = _rng(seed).spawn(2)
    draws = iid_stream(distribution, draw_rng)
    for _ in range(pretrain):
        learner.update(next(draws))
    transcript = GameTranscript()
    for _ in range(rounds):
        example = next(draws)
        predictor = learner.predictor()
        z = attacker.checked_attack(predictor, example, attack_rng)
        prediction = predictor(z)
        transcript.rounds.append(
            GameRound(example.instance, example.label, z, prediction, prediction != example.label, predictor.fingerprint)
        )
        learner.update(LabeledExample(z, example.label))
    logger.debug("attack game (%s): %d rounds, %d successes", attacker.kind, rounds, transcript.successes)
    return transcript


# ---------------------------------------------------------------------------
# Adversaire de borne inférieure sur les seuils
# ---------------------------------------------------------------------------
# Instances : x_1..x_d aux indices 0..d-1, x_0 à l'indice d.

def threshold_predictor(d: int, q: int) -> TableLookup:
    """h_q : +1 sur x_1..x_q, -1 sur x_{q+1}..x_d et sur x_0."""
    return TableLookup(tuple(1 if j < q else -1 for j in range(d)) + (-1,))


def lower_bound_class(d: int) -> HypothesisClass:
    """Les seuils candidats h_1..h_{d-1} sur d + 1 instances."""
    return HypothesisClass(np.stack([threshold_predictor(d, q).table for q in range(1, d)]))


def lower_bound_perturbation(d: int, secret: int) -> PerturbationSet:
    """U_{h_r} : U(x_1) = {x_1..x_r}, U(x_d) = {x_{r+1}..x_d}, {x_0} ailleurs."""
    if d < 3:
        raise ValueError(f"threshold game needs d >= 3, got {d}")
    if not 1 <= secret <= d - 1:
        raise ValueError(f"secret threshold must lie in 1..{d - 1}, got {secret}")
    dump = [d]
    sets = [dump] * (d + 1)
    sets[0] = range(secret)
    sets[d - 1] = range(secret, d)
    return PerturbationSet(sets)


def lower_bound_distribution(d: int) -> FiniteDistribution:
    """Uniforme sur {(x_1, +1), (x_d, -1)}."""
    return FiniteDistribution.uniform([LabeledExample(0, 1), LabeledExample(d - 1, -1)])


class LowerBoundOracle:
    """
    Oracle parfait de l'adversaire : premier z mal classé à droite de x_1
    pour les requêtes sur x_1, à gauche de x_d pour x_d, x_0 ailleurs.
    Seules les étiquettes du prédicteur sont inspectées.
    """

    def __init__(self, d: int, secret: int):
        self.d = d
        self.secret = secret
        self.u = lower_bound_perturbation(d, secret)
        self._ascending = CanonicalOracle(self.u)
        self._descending = CanonicalOracle(self.u, descending=True)

    def query(self, predictor: Predictor, example: LabeledExample) -> OracleResponse:
        if example.instance == self.d - 1:
            return self._descending.query(predictor, example)
        return self._ascending.query(predictor, example)


class QueryStrategy(Protocol):
    """Stratégie de requêtes : propose (prédicteur, exemple) à partir de V."""

    def propose(self, version_space: Sequence[int], rng: np.random.Generator) -> tuple[Predictor, LabeledExample]: ...

    def observe(self, response: OracleResponse) -> None: ...


class BinarySearchStrategy:
    """Requête h_q sur x_1 avec q médian de V : sépare r ≤ q de r > q."""

    def __init__(self, d: int):
        self.d = d

    def propose(self, version_space, rng):
        q = version_space[(len(version_space) - 1) // 2]
        return threshold_predictor(self.d, q), LabeledExample(0, 1)

    def observe(self, response):
        pass


class SOAStrategy:
    """
    Interroge la prédiction SOA sur V, d'abord sur x_1 puis, si elle y est
    certifiée, le même prédicteur sur x_d.
    """

    def __init__(self, d: int):
        self.d = d
        self.hypotheses = lower_bound_class(d)
        self._pending: Optional[Predictor] = None
        self._last: Optional[tuple[Predictor, int]] = None

    def propose(self, version_space, rng):
        if self._pending is not None:
            predictor, self._pending = self._pending, None
            self._last = (predictor, self.d - 1)
            return predictor, LabeledExample(self.d - 1, -1)
        mask = self.hypotheses.mask_of(q - 1 for q in version_space)
        predictor = TableLookup.from_array(soa_table(self.hypotheses, mask))
        self._last = (predictor, 0)
        return predictor, LabeledExample(0, 1)

    def observe(self, response):
        predictor, endpoint = self._last
        self._pending = predictor if response.is_robust and endpoint == 0 else None


class RandomStrategy:
    """h_q avec q uniforme dans V, sur une extrémité tirée au hasard."""

    def __init__(self, d: int):
        self.d = d

    def propose(self, version_space, rng):
        q = version_space[int(rng.integers(len(version_space)))]
        if rng.random() < 0.5:
            return threshold_predictor(self.d, q), LabeledExample(0, 1)
        return threshold_predictor(self.d, q), LabeledExample(self.d - 1, -1)

    def observe(self, response):
        pass


def make_strategy(kind: StrategyKind, d: int) -> QueryStrategy:
    if kind == StrategyKind.BINARY_SEARCH:
        return BinarySearchStrategy(d)
    if kind == StrategyKind.SOA:
        return SOAStrategy(d)
    if kind == StrategyKind.RANDOM:
        return RandomStrategy(d)
    raise ValueError(f"unknown strategy {kind!r}")


def threshold_lower_bound_game(
    strategy: Union[StrategyKind, QueryStrategy],
    d: int,
    seed: Seed,
    round_cap: Optional[int] = None,
    log: Optional[QueryLog] = None,
) -> ThresholdGameState:
    """
    Tire r uniforme dans 1..d-1 et fait jouer la stratégie contre l'oracle
    O_{U_{h_r}} jusqu'à identifier h_r (risque robuste exact nul sur D).

    L'espace de versions visible V garde les seuils r' dont l'oracle
    O_{U_{h_r'}} aurait donné exactement les mêmes réponses.

    Returns:
        ThresholdGameState: requêtes, tailles |V_t| (V_0 compris) et prédicteur final

    Raises:
        NonTerminatingError: plus de `round_cap` requêtes (4d par défaut).
    """
    rng = _rng(seed)
    secret = int(rng.integers(1, d))
    oracles = {r: LowerBoundOracle(d, r) for r in range(1, d)}
    oracle = oracles[secret]
    if isinstance(strategy, StrategyKind):
        strategy = make_strategy(strategy, d)
    round_cap = 4 * d if round_cap is None else round_cap
    log = QueryLog() if log is None else log
    state = ThresholdGameState(d, secret, list(range(1, d)))
    state.sizes.append(len(state.version_space))
    while len(state.version_space) > 1:
        if state.queries >= round_cap:
            raise NonTerminatingError(f"strategy still has {len(state.version_space)} candidates after {round_cap} queries")
        predictor, example = strategy.propose(state.version_space, rng)
        response = log.ask(oracle, predictor, example, "lower-bound")
        strategy.observe(response)
        state.version_space = [
            r for r in state.version_space if oracles[r].query(predictor, example) == response
        ]
        state.queries += 1
        state.sizes.append(len(state.version_space))
    state.output = threshold_predictor(d, state.version_space[0])
    return state


def threshold_online_game(learner: OnlineLearner, d: int, rounds: int, seed: Seed) -> GameTranscript:
    """
    Jeu d'attaque en ligne où l'attaquant est l'oracle O_{U_{h_r}} (r secret
    uniforme) et D = Uniforme{(x_1, +1), (x_d, -1)}.
    """
    rng = _rng(seed)
    secret = int(rng.integers(1, d))
    oracle = LowerBoundOracle(d, secret)
    attacker = OracleAttacker(oracle, oracle.u)
    return attack_game(learner, attacker, lower_bound_distribution(d), oracle.u, rounds, rng)


# ---------------------------------------------------------------------------
# Attaquant imparfait
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackerErrorEstimate:
    """err_A(ĥ; D) : valeur, rayon de confiance (0 si exact)."""
    value: float
    radius: float
    exact: bool


def attacker_error(
    predictor: Predictor,
    attacker: Attacker,
    distribution: FiniteDistribution,
    trials: Optional[int] = None,
    seed: Seed = 0,
) -> AttackerErrorEstimate:
    """
    Pr[ĥ(A(ĥ, (x, y))) ≠ y].

    Calcul exact par énumération des atomes si l'attaquant expose sa loi et
    que `trials` n'est pas fourni ; sinon Monte Carlo avec un rayon de
    Hoeffding à 95 %.
    """
    if trials is None:
        total = 0.0
        for example, probability in distribution.atoms:
            outcomes = attacker.outcomes(predictor, example)
            if outcomes is None:
                raise ValueError(f"{attacker.kind} attacker has no exact outcome law; pass trials")
            total += probability * math.fsum(q for z, q in outcomes if predictor(z) != example.label)
        return AttackerErrorEstimate(total, 0.0, True)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = _rng(seed)
    draws = iid_stream(distribution, rng)
    errors = 0
    for _ in range(trials):
        example = next(draws)
        errors += predictor(attacker.checked_attack(predictor, example, rng)) != example.label
    return AttackerErrorEstimate(errors / trials, math.sqrt(math.log(2 / 0.05) / (2 * trials)), False)


def survivor_sample_size(littlestone: int, epsilon: float, delta: float) -> tuple[int, int]:
    """(longueur de série, plafond de tours) pour l'apprenant survivant."""
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    log_term = math.log((littlestone + 1) / delta)
    streak = math.ceil(log_term / epsilon)
    return streak, math.ceil(2 * littlestone / epsilon * log_term) + streak


@dataclass
class SurvivorResult:
    predictor: Predictor
    rounds: int
    updates: int
    streak: int
    cap: int


def survivor_learn(
    stream: Iterator[LabeledExample],
    learner: OnlineLearner,
    attacker: Attacker,
    epsilon: float,
    delta: float,
    littlestone: int,
    seed: Seed = 0,
) -> SurvivorResult:
    """
    Renvoie le premier prédicteur qui survit à une série de
    ⌈(1/ε) ln((L+1)/δ)⌉ exemples attaqués consécutifs sans erreur.

    Raises:
        SurvivorFailure: plafond de tours atteint.
        ContractViolation: attaquant honnête hors de U(x).
    """
    if not learner.conservative:
        raise ValueError("survivor_learn needs a conservative online learner")
    streak, cap = survivor_sample_size(littlestone, epsilon, delta)
    rng = _rng(seed)
    current = learner.predictor()
    survived = 0
    updates = 0
    for consumed in range(1, cap + 1):
        example = next(stream)
        z = attacker.checked_attack(current, example, rng)
        if learner.update(LabeledExample(z, example.label)):
            updates += 1
            survived = 0
            current = learner.predictor()
            continue
        survived += 1
        if survived >= streak:
            return SurvivorResult(current, consumed, updates, streak, cap)
    raise SurvivorFailure(f"no predictor survived {streak} attacked examples within {cap} rounds ({updates} updates)")
