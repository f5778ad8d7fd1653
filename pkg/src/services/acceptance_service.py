"""
Runner des suites d'acceptation.

Chaque essai reçoit un générateur dérivé de (graine maître, suite, indice) :
les essais sont indépendants de leur nombre et de l'ordre d'exécution, et
les résultats sont réordonnés par indice avant émission.
"""
import logging
import math
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Optional

import numpy as np

from src.config import Settings, get_settings
from src.models.enums import AttackerKind, ExpertMode, ScenarioKind, StrategyKind, SuiteId
from src.models.perturbation import QueryLog
from src.models.universe import LabeledExample
from src.schemas.experiment import AcceptanceReport, Criterion, ExperimentConfig, TrialResult
from src.services.compression_service import (
    cycle_robust,
    stability_check,
    stable_compression_bound,
    robust_compression_bound,
)
from src.services.dimension_service import (
    dimension_report,
    littlestone_dimension,
    littlestone_tree_depth,
    make_threshold_class,
    sample_iid,
    verify_tree,
)
from src.services.game_service import (
    LowerBoundOracle,
    OracleAttacker,
    SurvivorFailure,
    attack_game,
    attacker_error,
    iid_stream,
    make_attacker,
    survivor_learn,
    survivor_sample_size,
    threshold_lower_bound_game,
)
from src.services.online_service import ConservativenessViolation, adversarial_mistakes, run_sequence, soa, soa_factory
from src.services.perturbation_service import (
    CanonicalOracle,
    canonical_oracle,
    empirical_robust_loss,
    opt_robust_risk,
    robust_risk,
)
from src.services.rlua_service import (
    MARGIN,
    BoostFailure,
    ConfidenceBoostFailure,
    RluaConfig,
    SparsifyFailure,
    SubsetCache,
    agnostic_reduce,
    rlua_learn,
)
from src.services.scenario_service import (
    Scenario,
    generate_scenario,
    max_realizable_size,
    random_class,
    reference_patterns,
    sample_opt,
)
from src.services.serialization_service import read_class, read_distribution, read_perturbation, verify_log
from src.services.weighted_majority_service import (
    CONTRACTION_TOLERANCE,
    agnostic_sample_size,
    default_eta,
    expert_family_size,
    expert_regret_bound,
    finite_wm_bound,
    online_to_batch,
    stream_opt,
    wm_experts,
    wm_finite,
)

logger = logging.getLogger(__name__)

# écart toléré sur les comparaisons flottantes des bornes « pire cas »
BOUND_TOLERANCE = 1e-9


@dataclass
class TrialContext:
    """État partagé par les essais d'une exécution (caches par scénario)."""
    settings: Settings
    caches: dict[Any, SubsetCache] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def cache(self, key) -> SubsetCache:
        with self.lock:
            return self.caches.setdefault(key, {})


TrialFunction = Callable[[ExperimentConfig, int, np.random.Generator, int, TrialContext], TrialResult]
CriteriaFunction = Callable[[list[TrialResult], ExperimentConfig], list[Criterion]]


@dataclass(frozen=True)
class Suite:
    id: SuiteId
    default_trials: int
    trial: TrialFunction
    criteria: CriteriaFunction
    multiplier: Callable[[ExperimentConfig], int] = lambda config: 1


@dataclass
class AcceptanceOutcome:
    report: AcceptanceReport
    results: list[TrialResult]


def trial_seed(master: int, suite: str, trial: int) -> np.random.SeedSequence:
    """Graine d'essai dérivée par compteur : (maître, crc32(suite), indice)."""
    return np.random.SeedSequence([master, zlib.crc32(suite.encode("utf-8")), trial])


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n) if n else 0.0


def _result(suite: SuiteId, scenario: str, index: int, seed: int, **values) -> TrialResult:
    return TrialResult(suite=suite.value, scenario=scenario, trial=index, seed=seed, **values)


def _scenario(
    config: ExperimentConfig,
    rng: np.random.Generator,
    kind: ScenarioKind,
    params: dict[str, Any],
    realizable: bool,
    context: TrialContext,
    seed: Optional[int] = None,
) -> Scenario:
    """Scénario de l'essai : fichiers de la config, sinon générateur."""
    if config.class_file:
        if not (config.perturbation_file and config.distribution_file):
            raise ValueError("class_file needs perturbation_file and distribution_file as well")
        hypotheses = read_class(config.class_file)
        u = read_perturbation(config.perturbation_file)
        distribution = read_distribution(config.distribution_file)
        opt, _ = opt_robust_risk(hypotheses, distribution, u)
        return Scenario(ScenarioKind.CUSTOM, hypotheses.space, hypotheses, u, distribution, opt == 0)
    seed = int(rng.integers(2 ** 31)) if seed is None else seed
    return generate_scenario(
        config.scenario or kind,
        {**params, **config.scenario_params},
        seed,
        realizable if config.realizable is None else config.realizable,
        context.settings,
    )


def zero_violations(name: str, description: str, results: list[TrialResult]) -> Criterion:
    count = sum(result.hard_violation for result in results)
    return Criterion(
        name=name, description=description, observed=count, threshold=0,
        trials=len(results), violations=count, passed=count == 0,
    )


def rate_within(name: str, description: str, results: list[TrialResult], delta: float) -> Criterion:
    """Fréquence de violation ≤ δ + 3σ (σ binomial sous p = δ)."""
    count = sum(result.violation for result in results)
    rate = count / len(results) if results else 0.0
    threshold = delta + 3 * binomial_sigma(delta, len(results))
    return Criterion(
        name=name, description=description, observed=rate, threshold=threshold,
        trials=len(results), violations=count, passed=rate <= threshold,
    )


# ---------------------------------------------------------------------------
# dimensions
# ---------------------------------------------------------------------------

def _trial_dimensions(config, index, rng, seed, context):
    if index < 4:
        n = 2 ** (index + 1)
        _, hypotheses = make_threshold_class(n)
        report = dimension_report(hypotheses)
        ok = report.vc == 1 and report.threshold == n and report.littlestone == n.bit_length() - 1
        return _result(
            SuiteId.DIMENSIONS, "thresholds", index, seed, hard_violation=not ok,
            extra={"n": n, "vc": report.vc, "littlestone": report.littlestone, "threshold": report.threshold},
        )
    n_instances = int(rng.integers(1, 5))
    hypotheses = random_class(n_instances, int(rng.integers(1, 2 ** n_instances + 1)), rng)
    depth, tree = littlestone_tree_depth(hypotheses)
    lit = littlestone_dimension(hypotheses)
    try:
        dimension_report(hypotheses)
        relations = True
    except ValueError:
        relations = False
    ok = depth == lit and verify_tree(hypotheses, tree) and relations
    return _result(
        SuiteId.DIMENSIONS, "random-class", index, seed, hard_violation=not ok,
        extra={"instances": n_instances, "hypotheses": hypotheses.n_hypotheses, "littlestone": lit, "tree_depth": depth},
    )


def _criteria_dimensions(results, config):
    return [zero_violations(
        "dimension-cross-checks",
        "thresholds: vc=1, Tdim=n, lit=floor(log2 n); recursion equals explicit tree depth on |X| <= 4",
        results,
    )]


# ---------------------------------------------------------------------------
# cyclerobust
# ---------------------------------------------------------------------------

SMALL_RANDOM = {"instances": 6, "hypotheses": 12, "extra": 2, "max_littlestone": 3}


def _trial_cyclerobust(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, SMALL_RANDOM, True, context)
    hypotheses, u = scenario.hypotheses, scenario.u
    m = config.m or 20
    sample = sample_iid(scenario.distribution, m, rng)
    oracle = canonical_oracle(u)
    predictor, record, log = cycle_robust(sample, soa(hypotheses), oracle)
    lit = littlestone_dimension(hypotheses)
    loss = empirical_robust_loss(predictor, sample, u)
    stable = stability_check(sample, record, soa_factory(hypotheses), oracle, draws=5, seed=rng)
    checks = {
        "zero_loss": loss == 0,
        "size_within_lit": record.size <= lit,
        "queries_within_bound": log.total <= m * (lit + 1),
        "stable": stable,
        "log_verified": verify_log(log, u),
    }
    return _result(
        SuiteId.CYCLEROBUST, scenario.kind.value, index, seed,
        risk=loss, queries=log.total, compression_size=record.size,
        bound=float(m * (lit + 1)), hard_violation=not all(checks.values()),
        extra={"littlestone": lit, "passes": record.passes, **{k: v for k, v in checks.items() if not v}},
    )


def _criteria_cyclerobust(results, config):
    return [zero_violations(
        "cyclerobust-realizable",
        "zero empirical robust loss, |kappa(S)| <= lit, queries <= m(lit+1), stable compression, verified log",
        results,
    )]


def _trial_generalization(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.THRESHOLDS, {"n": 8, "radius": 1}, True, context)
    m = config.m or 400
    delta = config.delta or 0.1
    sample = sample_iid(scenario.distribution, m, rng)
    predictor, record, log = cycle_robust(sample, soa(scenario.hypotheses), canonical_oracle(scenario.u))
    lit = littlestone_dimension(scenario.hypotheses)
    risk = robust_risk(predictor, scenario.distribution, scenario.u)
    bound = stable_compression_bound(m, lit, delta)
    return _result(
        SuiteId.CYCLEROBUST_GENERALIZATION, scenario.kind.value, index, seed,
        risk=risk, queries=log.total, compression_size=record.size, bound=bound,
        violation=risk > bound, hard_violation=record.size > lit,
    )


def _criteria_generalization(results, config):
    return [
        rate_within(
            "stable-compression-bound",
            "fraction of trials with exact robust risk above the stable compression bound",
            results, config.delta or 0.1,
        ),
        zero_violations("compression-size", "compression size never exceeds lit(H)", results),
    ]


# ---------------------------------------------------------------------------
# rlua
# ---------------------------------------------------------------------------

RLUA_RANDOM = {"instances": 5, "hypotheses": 8, "extra": 1, "max_littlestone": 2}
RLUA_SCENARIOS = 50


def _trial_rlua(config, index, rng, seed, context):
    slot = index % RLUA_SCENARIOS
    scenario_seed = int(trial_seed(config.seed, "rlua-scenario", slot).generate_state(1)[0] >> 1)
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, RLUA_RANDOM, True, context, scenario_seed)
    hypotheses, u = scenario.hypotheses, scenario.u
    m = config.m or 24
    delta = config.delta or 0.1
    sample = sample_iid(scenario.distribution, m, rng)
    rlua_config = RluaConfig(
        subset_size=config.n or 3,
        rounds=config.rounds,
        votes=config.votes,
        weak_retry_cap=context.settings.weak_retry_cap,
        sparsify_retry_cap=context.settings.sparsify_retry_cap,
        jobs=config.jobs,
    )
    log = QueryLog()
    try:
        result = rlua_learn(sample, soa_factory(hypotheses), canonical_oracle(u), rlua_config, rng, log, context.cache(("rlua", slot)))
    except (BoostFailure, SparsifyFailure) as exc:
        logger.warning("rlua trial %d failed: %s", index, exc)
        return _result(
            SuiteId.RLUA, scenario.kind.value, index, seed, queries=log.total,
            hard_violation=not verify_log(log, u), extra={"failed": type(exc).__name__},
        )
    k = len(result.compression)
    risk = robust_risk(result.predictor, scenario.distribution, u)
    bound = robust_compression_bound(m, k, delta) if m > k else 1.0
    checks = {
        "patterns_exact": result.dset.patterns == reference_patterns(result.pool.tables, sample, u),
        "margin": result.run.margin >= MARGIN - 1e-12,
        "zero_loss": empirical_robust_loss(result.predictor, sample, u) == 0,
        "log_verified": verify_log(log, u),
    }
    return _result(
        SuiteId.RLUA, scenario.kind.value, index, seed,
        risk=risk, queries=log.total, compression_size=k, bound=bound,
        violation=risk > bound, hard_violation=not all(checks.values()),
        extra={
            "pool": result.pool.size, "patterns": result.dset.size, "dual_vc": result.pool_dual_vc,
            "sauer_envelope": result.sauer_envelope, "margin": result.run.margin, "votes": result.votes,
            **{name: ok for name, ok in checks.items() if not ok},
        },
    )


def _criteria_rlua(results, config):
    completed = [result for result in results if "failed" not in result.extra]
    failures = len(results) - len(completed)
    rate = failures / len(results) if results else 0.0
    threshold = 1 / 3 + 3 * binomial_sigma(1 / 3, len(results))
    return [
        zero_violations(
            "rlua-pipeline",
            "discretizer patterns equal the exhaustive S_U patterns, margin >= 5/9, sparsified majority has zero loss",
            results,
        ),
        rate_within(
            "robust-compression-bound",
            "fraction of completed runs with robust risk above the robust compression bound",
            completed, config.delta or 0.1,
        ),
        Criterion(
            name="rlua-completion",
            description="weak-learner or sparsification failures stay within the 1/3 failure budget",
            observed=rate, threshold=threshold, trials=len(results), violations=failures,
            passed=rate <= threshold,
        ),
    ]


# ---------------------------------------------------------------------------
# agnostic reduction
# ---------------------------------------------------------------------------

AGNOSTIC_RANDOM = {"instances": 5, "hypotheses": 8, "extra": 1, "max_littlestone": 2, "noise": 0.25}


def _trial_agnostic(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, AGNOSTIC_RANDOM, False, context)
    hypotheses, u = scenario.hypotheses, scenario.u
    m = min(config.m or 8, 12)
    sample = sample_iid(scenario.distribution, m, rng)
    losses, _ = sample_opt(hypotheses, sample, u)
    opt = losses / m
    expected_size = max_realizable_size(hypotheses, sample, u)
    weak = RluaConfig(
        subset_size=config.n or 3,
        weak_retry_cap=context.settings.weak_retry_cap,
        sparsify_retry_cap=context.settings.sparsify_retry_cap,
        jobs=config.jobs,
    )
    log = QueryLog()
    try:
        result = agnostic_reduce(sample, soa_factory(hypotheses), canonical_oracle(u), weak, rng, config.rounds, log=log)
    except ConfidenceBoostFailure as exc:
        logger.warning("agnostic trial %d: %s", index, exc)
        return _result(
            SuiteId.AGNOSTIC_REDUCTION, scenario.kind.value, index, seed, opt=opt, queries=log.total,
            violation=True, hard_violation=not verify_log(log, u), extra={"failed": type(exc).__name__},
        )
    loss = empirical_robust_loss(result.predictor, sample, u)
    checks = {
        "loss_within_opt": loss <= opt + BOUND_TOLERANCE,
        "maximal_subsequence": len(result.kept) == expected_size,
        "log_verified": verify_log(log, u),
    }
    return _result(
        SuiteId.AGNOSTIC_REDUCTION, scenario.kind.value, index, seed,
        risk=loss, opt=opt, queries=log.total, hard_violation=not all(checks.values()),
        extra={"kept": len(result.kept), "degenerate": result.degenerate, **{k: v for k, v in checks.items() if not v}},
    )


def _criteria_agnostic(results, config):
    return [
        zero_violations(
            "agnostic-reduction",
            "empirical robust loss <= brute-force OPT and |S'| equals the maximal realizable size",
            results,
        ),
        rate_within("confidence-boost-failures", "outer boosting failures", results, 1 / 3),
    ]


# ---------------------------------------------------------------------------
# soa
# ---------------------------------------------------------------------------

def _trial_soa(config, index, rng, seed, context):
    n_instances = int(rng.integers(3, 7))
    hypotheses = random_class(n_instances, int(rng.integers(4, 17)), rng)
    lit = littlestone_dimension(hypotheses)
    worst, _ = adversarial_mistakes(soa(hypotheses), hypotheses)
    target = int(rng.integers(hypotheses.n_hypotheses))
    xs = rng.integers(n_instances, size=config.rounds or 50)
    sequence = [LabeledExample(int(x), int(hypotheses.labels[target, x])) for x in xs]
    try:
        record = run_sequence(soa(hypotheses), sequence)
        conservative = True
    except ConservativenessViolation:
        record, conservative = None, False
    mistakes = record.count if record else None
    ok = worst == lit and conservative and mistakes <= lit
    return _result(
        SuiteId.SOA_MISTAKE_BOUND, "random-class", index, seed,
        mistakes=mistakes, bound=float(lit), hard_violation=not ok,
        extra={"adversarial_mistakes": worst, "littlestone": lit},
    )


def _criteria_soa(results, config):
    return [zero_violations(
        "soa-mistake-bound",
        "SOA mistakes <= lit(H) on realizable sequences and the exhaustive adversary forces exactly lit(H)",
        results,
    )]


# ---------------------------------------------------------------------------
# weighted majority
# ---------------------------------------------------------------------------

def _random_stream(hypotheses, length: int, rng) -> list[LabeledExample]:
    xs = rng.integers(hypotheses.n_instances, size=length)
    ys = rng.choice((-1, 1), size=length)
    return [LabeledExample(int(x), int(y)) for x, y in zip(xs, ys)]


def _trial_wm(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, {"instances": 5, "hypotheses": 10, "extra": 2}, False, context)
    hypotheses, u = scenario.hypotheses, scenario.u
    horizon = config.rounds or 30
    stream = _random_stream(hypotheses, horizon, rng)
    oracle = canonical_oracle(u)
    eta = config.eta if config.eta is not None else default_eta(hypotheses.n_hypotheses, horizon)
    run = wm_finite(hypotheses, stream, eta, oracle)
    opt, _ = stream_opt(hypotheses, stream, u)
    bound = finite_wm_bound(eta, opt, hypotheses.n_hypotheses)
    checks = {
        "finite_bound": run.mistakes <= bound + BOUND_TOLERANCE,
        "best_weight": opt == 0 or run.best_log_weight >= opt * math.log(eta) - BOUND_TOLERANCE,
        "contraction": all(r <= (1 + eta) / 2 * (1 + CONTRACTION_TOLERANCE) for r in run.contraction_ratios),
        "log_verified": verify_log(run.log, u),
    }
    extra: dict[str, Any] = {"eta": eta}
    if index < 100:
        extra.update(_expert_checks(config, index, rng, context, checks))
    return _result(
        SuiteId.WM_REGRET, scenario.kind.value, index, seed,
        mistakes=run.mistakes, opt=float(opt), bound=bound, queries=run.log.total,
        hard_violation=not all(checks.values()),
        extra={**extra, **{k: v for k, v in checks.items() if not v}},
    )


def _expert_checks(config, index, rng, context, checks) -> dict[str, Any]:
    scenario = _scenario(
        config, rng, ScenarioKind.RANDOM_CLASS,
        {"instances": 4, "hypotheses": 8, "extra": 1, "max_littlestone": 3}, False, context,
    )
    hypotheses, u = scenario.hypotheses, scenario.u
    horizon = min(config.rounds or 12, 20)
    stream = _random_stream(hypotheses, horizon, rng)
    oracle = canonical_oracle(u)
    lit = littlestone_dimension(hypotheses)
    family = expert_family_size(lit, horizon)
    eta = config.eta if config.eta is not None else default_eta(family, horizon)
    run = wm_experts(
        hypotheses, stream, oracle, horizon, eta, ExpertMode.GROUPED,
        context.settings.expert_family_cap, context.settings.expert_group_cap,
    )
    opt, _ = stream_opt(hypotheses, stream, u)
    raw = finite_wm_bound(eta, opt, family)
    sqrt_bound = expert_regret_bound(opt, family)
    # OPT = 0 : la forme √ vaut 0, on retombe sur b_η ln|Experts|
    checks["expert_bound"] = run.mistakes <= (sqrt_bound if opt > 0 else raw) + BOUND_TOLERANCE
    checks["expert_contraction"] = all(
        r <= (1 + eta) / 2 * (1 + CONTRACTION_TOLERANCE) for r in run.contraction_ratios
    )
    if index < 20:
        materialized = wm_experts(
            hypotheses, stream, oracle, horizon, eta, ExpertMode.MATERIALIZED,
            context.settings.expert_family_cap, context.settings.expert_group_cap,
        )
        checks["modes_agree"] = materialized.mistake_rounds == run.mistake_rounds and all(
            a.same_labels(b) for a, b in zip(materialized.predictors, run.predictors)
        )
        checks["best_expert_weight"] = materialized.best_log_weight >= opt * math.log(eta) - BOUND_TOLERANCE
    return {
        "expert_mistakes": run.mistakes, "expert_opt": opt, "expert_family": family,
        "expert_raw_bound": raw, "expert_sqrt_bound": sqrt_bound,
    }


def _criteria_wm(results, config):
    return [zero_violations(
        "wm-regret",
        "finite WM: M <= a_eta OPT + b_eta ln|H|; experts: M <= 2 OPT + 4 sqrt(OPT ln|Experts|), "
        "b_eta ln|Experts| when OPT = 0; "
        "weight contraction and best-weight invariants",
        results,
    )]


# ---------------------------------------------------------------------------
# online-to-batch
# ---------------------------------------------------------------------------

def _trial_online_to_batch(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.THRESHOLDS, {"n": 4, "radius": 1, "noise": 0.2}, False, context)
    hypotheses, u = scenario.hypotheses, scenario.u
    epsilon = config.epsilon or 0.2
    delta = config.delta or 0.2
    lit = littlestone_dimension(hypotheses)
    m = config.m or agnostic_sample_size(lit, epsilon, delta)
    mixture = online_to_batch(
        hypotheses, scenario.distribution, u, canonical_oracle(u), m, rng,
        config.eta, config.expert_mode, context.settings.expert_group_cap,
    )
    opt, _ = opt_robust_risk(hypotheses, scenario.distribution, u)
    bound = 2 * opt + epsilon
    return _result(
        SuiteId.ONLINE_TO_BATCH, scenario.kind.value, index, seed,
        risk=mixture.risk, opt=opt, mistakes=mixture.run.mistakes, queries=mixture.run.log.total,
        bound=bound, violation=mixture.risk > bound, hard_violation=not verify_log(mixture.run.log, u),
        extra={"m": m, "littlestone": lit},
    )


def _criteria_online_to_batch(results, config):
    return [
        rate_within(
            "online-to-batch",
            "fraction of trials where the mixture robust risk exceeds 2 opt + epsilon",
            results, config.delta or 0.2,
        ),
        zero_violations("online-to-batch-log", "every oracle response re-verifies", results),
    ]


# ---------------------------------------------------------------------------
# attack game
# ---------------------------------------------------------------------------

# horizons par défaut, en rotation sur les essais
ATTACK_HORIZONS = (100, 2000, 10_000)


def _trial_attack_game(config, index, rng, seed, context):
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, SMALL_RANDOM, True, context)
    hypotheses, u = scenario.hypotheses, scenario.u
    lit = littlestone_dimension(hypotheses)
    rounds = config.rounds or ATTACK_HORIZONS[index % len(ATTACK_HORIZONS)]
    attackers = [make_attacker(kind, u, config.blindness) for kind in AttackerKind]
    attackers.append(OracleAttacker(CanonicalOracle(u), u))
    successes = {}
    for attacker in attackers:
        transcript = attack_game(soa(hypotheses), attacker, scenario.distribution, u, rounds, rng, config.pretrain)
        successes[attacker.kind] = transcript.successes
    worst = max(successes.values())
    return _result(
        SuiteId.ATTACK_GAME, scenario.kind.value, index, seed,
        mistakes=worst, bound=float(lit), hard_violation=worst > lit,
        extra={"rounds": rounds, "successes": successes},
    )


def _criteria_attack_game(results, config):
    return [zero_violations(
        "attack-game-upper-bound",
        "SOA suffers at most lit(H) successful attacks against every shipped attacker",
        results,
    )]


# ---------------------------------------------------------------------------
# threshold lower bound
# ---------------------------------------------------------------------------

def _lower_bound_combos(config: ExperimentConfig) -> list[tuple[int, StrategyKind]]:
    sizes = [config.d] if config.d else [9, 17, 33]
    strategies = [config.strategy] if config.strategy else list(StrategyKind)
    return list(product(sizes, strategies))


def _trial_lower_bound(config, index, rng, seed, context):
    combos = _lower_bound_combos(config)
    d, strategy = combos[index % len(combos)]
    log = QueryLog()
    state = threshold_lower_bound_game(strategy, d, rng, log=log)
    ratios = [after / before for before, after in zip(state.sizes, state.sizes[1:])]
    verified = verify_log(log, LowerBoundOracle(d, state.secret).u)
    return _result(
        SuiteId.THRESHOLD_LOWER_BOUND, f"threshold-game-d{d}", index, seed,
        queries=state.queries, bound=math.log2(d - 1) / 2, hard_violation=not verified,
        extra={"d": d, "strategy": strategy.value, "ratio_sum": math.fsum(ratios), "ratio_count": len(ratios)},
    )


def _criteria_lower_bound(results, config):
    criteria = []
    for d, strategy in _lower_bound_combos(config):
        group = [r for r in results if r.extra["d"] == d and r.extra["strategy"] == strategy.value]
        if not group:
            continue
        queries = np.array([r.queries for r in group], dtype=float)
        sigma = float(queries.std(ddof=1)) / math.sqrt(len(group)) if len(group) > 1 else 0.0
        threshold = math.log2(d - 1) / 2 - 2 * sigma
        criteria.append(Criterion(
            name=f"lower-bound-d{d}-{strategy.value}",
            description="mean oracle queries >= log2(d-1)/2 - 2 sigma",
            observed=float(queries.mean()), threshold=threshold, trials=len(group),
            passed=float(queries.mean()) >= threshold,
        ))
        count = sum(r.extra["ratio_count"] for r in group)
        contraction = math.fsum(r.extra["ratio_sum"] for r in group) / count if count else 1.0
        criteria.append(Criterion(
            name=f"contraction-d{d}-{strategy.value}",
            description="average per-query version-space ratio |V_t|/|V_t-1| >= 1/4",
            observed=contraction, threshold=0.25, trials=len(group), passed=contraction >= 0.25,
        ))
    criteria.append(zero_violations("lower-bound-log", "every oracle response re-verifies", results))
    return criteria


# ---------------------------------------------------------------------------
# imperfect attacker
# ---------------------------------------------------------------------------

def _trial_imperfect(config, index, rng, seed, context):
    scenario_seed = int(trial_seed(config.seed, "imperfect-scenario", 0).generate_state(1)[0] >> 1)
    scenario = _scenario(config, rng, ScenarioKind.RANDOM_CLASS, SMALL_RANDOM, True, context, scenario_seed)
    hypotheses, u = scenario.hypotheses, scenario.u
    epsilon = config.epsilon or 0.2
    delta = config.delta or 0.2
    lit = littlestone_dimension(hypotheses)
    attacker = make_attacker(config.attacker, u, config.blindness)
    draw_rng, attack_rng = rng.spawn(2)
    _, cap = survivor_sample_size(lit, epsilon, delta)
    try:
        result = survivor_learn(iid_stream(scenario.distribution, draw_rng), soa(hypotheses), attacker, epsilon, delta, lit, attack_rng)
    except SurvivorFailure as exc:
        logger.warning("imperfect trial %d: %s", index, exc)
        return _result(SuiteId.IMPERFECT_ATTACKER, scenario.kind.value, index, seed, violation=True, hard_violation=True)
    error = attacker_error(result.predictor, attacker, scenario.distribution).value
    return _result(
        SuiteId.IMPERFECT_ATTACKER, scenario.kind.value, index, seed,
        risk=error, mistakes=result.updates, bound=epsilon,
        violation=error > epsilon,
        hard_violation=result.updates > lit or result.rounds > cap,
        extra={"rounds": result.rounds, "streak": result.streak, "cap": cap, "attacker": attacker.kind},
    )


def _criteria_imperfect(results, config):
    return [
        rate_within(
            "imperfect-attacker-generalization",
            "fraction of trials with err_A(output) > epsilon",
            results, config.delta or 0.2,
        ),
        zero_violations("survivor-accounting", "updates <= lit(H) and rounds within the cap", results),
    ]


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------

REPLAYED_SUITES = (
    SuiteId.DIMENSIONS,
    SuiteId.CYCLEROBUST,
    SuiteId.CYCLEROBUST_GENERALIZATION,
    SuiteId.RLUA,
    SuiteId.AGNOSTIC_REDUCTION,
    SuiteId.SOA_MISTAKE_BOUND,
    SuiteId.WM_REGRET,
    SuiteId.ONLINE_TO_BATCH,
    SuiteId.ATTACK_GAME,
    SuiteId.THRESHOLD_LOWER_BOUND,
    SuiteId.IMPERFECT_ATTACKER,
)
REPLAY_JOBS = 3


def _trial_determinism(config, index, rng, seed, context):
    """Rejoue une suite deux fois : séquentielle puis avec REPLAY_JOBS threads."""
    suite = REPLAYED_SUITES[index % len(REPLAYED_SUITES)]
    replay = config.model_copy(update={"trials": 3, "jobs": 1, "rounds": None})
    quiet = context.settings.model_copy(update={"record_timings": False})
    first = run_acceptance(suite, replay, quiet)
    second = run_acceptance(suite, replay.model_copy(update={"jobs": REPLAY_JOBS}), quiet)
    same = [r.model_dump_json() for r in first.results] == [r.model_dump_json() for r in second.results]
    clean = not any(r.hard_violation for r in first.results)
    return _result(
        SuiteId.DETERMINISM, suite.value, index, seed, hard_violation=not (same and clean),
        extra={"identical": same, "replayed": len(first.results)},
    )


def _criteria_determinism(results, config):
    return [zero_violations(
        "determinism",
        "two runs with the same master seed emit byte-identical JSON-lines and re-verified logs",
        results,
    )]


SUITES: dict[SuiteId, Suite] = {
    SuiteId.DIMENSIONS: Suite(SuiteId.DIMENSIONS, 64, _trial_dimensions, _criteria_dimensions),
    SuiteId.CYCLEROBUST: Suite(SuiteId.CYCLEROBUST, 500, _trial_cyclerobust, _criteria_cyclerobust),
    SuiteId.CYCLEROBUST_GENERALIZATION: Suite(
        SuiteId.CYCLEROBUST_GENERALIZATION, 2000, _trial_generalization, _criteria_generalization
    ),
    SuiteId.RLUA: Suite(SuiteId.RLUA, 1000, _trial_rlua, _criteria_rlua),
    SuiteId.AGNOSTIC_REDUCTION: Suite(SuiteId.AGNOSTIC_REDUCTION, 200, _trial_agnostic, _criteria_agnostic),
    SuiteId.SOA_MISTAKE_BOUND: Suite(SuiteId.SOA_MISTAKE_BOUND, 200, _trial_soa, _criteria_soa),
    SuiteId.WM_REGRET: Suite(SuiteId.WM_REGRET, 500, _trial_wm, _criteria_wm),
    SuiteId.ONLINE_TO_BATCH: Suite(SuiteId.ONLINE_TO_BATCH, 500, _trial_online_to_batch, _criteria_online_to_batch),
    SuiteId.ATTACK_GAME: Suite(SuiteId.ATTACK_GAME, 50, _trial_attack_game, _criteria_attack_game),
    SuiteId.THRESHOLD_LOWER_BOUND: Suite(
        SuiteId.THRESHOLD_LOWER_BOUND, 5000, _trial_lower_bound, _criteria_lower_bound,
        multiplier=lambda config: len(_lower_bound_combos(config)),
    ),
    SuiteId.IMPERFECT_ATTACKER: Suite(SuiteId.IMPERFECT_ATTACKER, 2000, _trial_imperfect, _criteria_imperfect),
    SuiteId.DETERMINISM: Suite(SuiteId.DETERMINISM, len(REPLAYED_SUITES), _trial_determinism, _criteria_determinism),
}


def run_trials(
    suite: Suite,
    config: ExperimentConfig,
    trials: int,
    context: TrialContext,
    sink: Optional[Callable[[TrialResult], None]] = None,
) -> list[TrialResult]:
    """Exécute les essais 0..trials-1 (pool de threads borné), triés par indice."""

    def one(index: int) -> TrialResult:
        sequence = trial_seed(config.seed, suite.id.value, index)
        rng = np.random.default_rng(sequence)
        seed = int(sequence.generate_state(1)[0])
        start = time.perf_counter()
        result = suite.trial(config, index, rng, seed, context)
        if context.settings.record_timings:
            result.wall_time = round(time.perf_counter() - start, 6)
        return result

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as executor:
            results = list(executor.map(one, range(trials)))
    else:
        results = [one(index) for index in range(trials)]
    if sink is not None:
        for result in results:
            sink(result)
    return results


def run_acceptance(
    suite_id: SuiteId,
    config: ExperimentConfig,
    settings: Optional[Settings] = None,
    sink: Optional[Callable[[TrialResult], None]] = None,
) -> AcceptanceOutcome:
    """
    Lance une suite et évalue ses critères.

    Args:
        suite_id: suite à exécuter
        config: configuration ; `trials` remplace le nombre d'essais par défaut
        sink: appelé sur chaque résultat, dans l'ordre des indices

    Returns:
        AcceptanceOutcome: rapport (verdict par critère) et résultats bruts
    """
    suite = SUITES[suite_id]
    context = TrialContext(settings or get_settings())
    trials = (config.trials or suite.default_trials) * suite.multiplier(config)
    logger.info("acceptance %s: %d trials, seed %d", suite_id.value, trials, config.seed)
    results = run_trials(suite, config, trials, context, sink)
    report = AcceptanceReport(suite=suite_id, seed=config.seed, trials=trials, criteria=suite.criteria(results, config))
    logger.info("acceptance %s: %s", suite_id.value, report.verdict.value)
    return AcceptanceOutcome(report, results)
