"""
Interface en ligne de commande : `python -m src <commande> ...`.

Les résultats (une ligne JSON par essai) sortent sur stdout ou dans
`--out` ; les logs sur stderr. Codes de sortie : 0 succès, 1 critère
d'acceptation ou revérification en échec, 2 entrée invalide ou erreur
d'un algorithme.
"""
import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional, TextIO

import numpy as np

from src.config import Settings, configure_logging, get_settings
from src.models.base import RobustLearningError
from src.models.enums import AttackerKind, ExpertMode, StrategyKind, SuiteId, Verdict
from src.models.perturbation import PerturbationSet, QueryLog
from src.models.universe import FiniteDistribution, HypothesisClass
from src.schemas.experiment import ExperimentConfig, TrialResult
from src.services.acceptance_service import run_acceptance, trial_seed
from src.services.compression_service import NonRealizableError, cycle_robust, stable_compression_bound, robust_compression_bound
from src.services.dimension_service import check_scale, dimension_report, littlestone_dimension, sample_iid
from src.services.game_service import (
    SurvivorFailure,
    attack_game,
    attacker_error,
    iid_stream,
    lower_bound_class,
    make_attacker,
    survivor_learn,
    survivor_sample_size,
    threshold_lower_bound_game,
    threshold_online_game,
)
from src.services.online_service import run_sequence, soa, soa_factory
from src.services.perturbation_service import canonical_oracle, empirical_robust_loss, opt_robust_risk, robust_risk
from src.services.rlua_service import BoostFailure, ConfidenceBoostFailure, RluaConfig, SparsifyFailure, agnostic_reduce, rlua_learn
from src.services.scenario_service import sample_opt
from src.services.serialization_service import (
    FormatError,
    attack_check,
    query_log_lines,
    read_class,
    read_distribution,
    read_perturbation,
    read_sequence,
    transcript_lines,
)
from src.services.weighted_majority_service import (
    default_eta,
    expert_family_size,
    finite_wm_bound,
    stream_opt,
    wm_experts,
    wm_finite,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

# option CLI -> champ d'ExperimentConfig
CONFIG_FLAGS = {
    "m": "m",
    "n": "n",
    "T": "rounds",
    "N": "votes",
    "eta": "eta",
    "eps": "epsilon",
    "delta": "delta",
    "trials": "trials",
    "seed": "seed",
    "jobs": "jobs",
    "attacker": "attacker",
    "blindness": "blindness",
    "strategy": "strategy",
    "d": "d",
    "expert_mode": "expert_mode",
    "pretrain": "pretrain",
}


@dataclass
class Problem:
    """Classe, perturbations et distribution lues depuis les fichiers."""
    hypotheses: HypothesisClass
    u: PerturbationSet
    distribution: FiniteDistribution


TrialRunner = Callable[[int, np.random.Generator, int], tuple[TrialResult, list[str]]]


# ---------------------------------------------------------------------------
# Entrées / sorties
# ---------------------------------------------------------------------------

def load_config(args: argparse.Namespace, settings: Settings) -> ExperimentConfig:
    """Fichier `--config` (ou valeurs par défaut des settings), puis options CLI."""
    if getattr(args, "config", None):
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        values = {"seed": settings.master_seed, "jobs": settings.jobs}
    for flag, name in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    return ExperimentConfig.model_validate(values)


def load_problem(args: argparse.Namespace, settings: Settings) -> Problem:
    """
    Raises:
        FormatError: fichiers mal formés ou de tailles incompatibles.
        ScaleCapExceeded: classe au-delà des plafonds.
    """
    hypotheses = read_class(args.class_file)
    u = read_perturbation(args.perturbation_file)
    distribution = read_distribution(args.distribution_file)
    if u.n_instances != hypotheses.n_instances:
        raise FormatError(
            f"perturbation file covers {u.n_instances} instances, class has {hypotheses.n_instances}"
        )
    try:
        distribution.check_range(hypotheses.n_instances)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    check_scale(hypotheses, settings)
    return Problem(hypotheses, u, distribution)


def output_path(name: str, settings: Settings) -> Path:
    """Un nom nu est placé dans `output_dir` ; un chemin est gardé tel quel."""
    path = Path(name)
    if path.parent == Path("."):
        path = Path(settings.output_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


@contextmanager
def open_output(name: Optional[str], settings: Settings) -> Iterator[TextIO]:
    if not name or name == "-":
        yield sys.stdout
        return
    with output_path(name, settings).open("w", encoding="utf-8") as handle:
        yield handle


def write_lines(handle: TextIO, lines) -> None:
    for line in lines:
        handle.write(line + "\n")
    handle.flush()


def run_trials(command: str, config: ExperimentConfig, default_trials: int, trial: TrialRunner) -> list[tuple[TrialResult, list[str]]]:
    """Essais 0..trials-1 avec une graine dérivée de (maître, commande, indice), triés par indice."""
    trials = config.trials or default_trials

    def one(index: int):
        sequence = trial_seed(config.seed, command, index)
        return trial(index, np.random.default_rng(sequence), int(sequence.generate_state(1)[0]))

    logger.info("%s: %d trials, seed %d", command, trials, config.seed)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as executor:
            return list(executor.map(one, range(trials)))
    return [one(index) for index in range(trials)]


def emit_trials(args, settings: Settings, results: list[tuple[TrialResult, list[str]]]) -> int:
    with open_output(args.out, settings) as handle:
        write_lines(handle, (result.model_dump_json() for result, _ in results))
    if getattr(args, "log_out", None):
        with open_output(args.log_out, settings) as handle:
            write_lines(handle, (line for _, lines in results for line in lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Commandes
# ---------------------------------------------------------------------------

def cmd_dims(args, settings, config) -> int:
    hypotheses = read_class(args.class_file)
    check_scale(hypotheses, settings)
    with open_output(args.out, settings) as handle:
        write_lines(handle, [dimension_report(hypotheses).model_dump_json()])
    return EXIT_OK


def cmd_online_game(args, settings, config) -> int:
    hypotheses = read_class(args.class_file)
    check_scale(hypotheses, settings)
    sequence = read_sequence(args.sequence_file)
    for example in sequence:
        example.check_range(hypotheses.n_instances)
    record = run_sequence(soa(hypotheses), sequence)
    with open_output(args.out, settings) as handle:
        write_lines(handle, [json.dumps(record.to_dict(), sort_keys=True)])
    return EXIT_OK


def cmd_cyclerobust(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses, u = problem.hypotheses, problem.u
    lit = littlestone_dimension(hypotheses)
    m = config.m or 100
    delta = config.delta or 0.1

    def trial(index, rng, seed):
        sample = sample_iid(problem.distribution, m, rng)
        log = QueryLog()
        try:
            predictor, record, _ = cycle_robust(sample, soa(hypotheses), canonical_oracle(u), log=log)
        except NonRealizableError as exc:
            logger.warning("cyclerobust trial %d: %s", index, exc)
            return TrialResult(
                suite="cyclerobust", scenario="custom", trial=index, seed=seed,
                queries=log.total, violation=True, extra={"failed": str(exc)},
            ), list(query_log_lines(log))
        risk = robust_risk(predictor, problem.distribution, u)
        bound = stable_compression_bound(m, lit, delta) if m > 2 * lit else 1.0
        return TrialResult(
            suite="cyclerobust", scenario="custom", trial=index, seed=seed,
            risk=risk, queries=log.total, compression_size=record.size, bound=bound,
            violation=risk > bound, hard_violation=record.size > lit,
            extra={"passes": record.passes, "littlestone": lit},
        ), list(query_log_lines(log))

    return emit_trials(args, settings, run_trials("cyclerobust", config, 1, trial))


def _weak_config(config: ExperimentConfig, settings: Settings) -> RluaConfig:
    return RluaConfig(
        subset_size=config.n,
        rounds=config.rounds,
        votes=config.votes,
        weak_retry_cap=settings.weak_retry_cap,
        sparsify_retry_cap=settings.sparsify_retry_cap,
    )


def cmd_rlua(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses, u = problem.hypotheses, problem.u
    m = config.m or 24
    delta = config.delta or 0.1
    opt, _ = opt_robust_risk(hypotheses, problem.distribution, u)
    rlua_config = _weak_config(config, settings)

    def trial(index, rng, seed):
        sample = sample_iid(problem.distribution, m, rng)
        log = QueryLog()
        try:
            result = rlua_learn(sample, soa_factory(hypotheses), canonical_oracle(u), rlua_config, rng, log)
        except (BoostFailure, SparsifyFailure) as exc:
            logger.warning("rlua trial %d: %s", index, exc)
            return TrialResult(
                suite="rlua", scenario="custom", trial=index, seed=seed,
                opt=opt, queries=log.total, extra={"failed": type(exc).__name__},
            ), list(query_log_lines(log))
        k = len(result.compression)
        risk = robust_risk(result.predictor, problem.distribution, u)
        bound = robust_compression_bound(m, k, delta) if m > k else 1.0
        return TrialResult(
            suite="rlua", scenario="custom", trial=index, seed=seed,
            risk=risk, opt=opt, queries=log.total, compression_size=k, bound=bound, violation=risk > bound,
            extra={
                "pool_size": result.pool.size, "dset_size": result.dset.size,
                "T": result.run.length, "N": result.votes, "n": result.subset_size,
                "margin": result.run.margin,
            },
        ), list(query_log_lines(log))

    return emit_trials(args, settings, run_trials("rlua", config, 1, trial))


def cmd_rlua_agnostic(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses, u = problem.hypotheses, problem.u
    m = config.m or 8
    opt, _ = opt_robust_risk(hypotheses, problem.distribution, u)
    weak = _weak_config(config, settings)

    def trial(index, rng, seed):
        sample = sample_iid(problem.distribution, m, rng)
        log = QueryLog()
        try:
            result = agnostic_reduce(sample, soa_factory(hypotheses), canonical_oracle(u), weak, rng, config.rounds, log=log)
        except ConfidenceBoostFailure as exc:
            logger.warning("rlua-agnostic trial %d: %s", index, exc)
            return TrialResult(
                suite="rlua-agnostic", scenario="custom", trial=index, seed=seed,
                opt=opt, queries=log.total, violation=True, extra={"failed": type(exc).__name__},
            ), list(query_log_lines(log))
        loss = empirical_robust_loss(result.predictor, sample, u)
        sample_losses, _ = sample_opt(hypotheses, sample, u)
        return TrialResult(
            suite="rlua-agnostic", scenario="custom", trial=index, seed=seed,
            risk=robust_risk(result.predictor, problem.distribution, u), opt=opt, queries=log.total,
            violation=loss > sample_losses / m,
            extra={
                "empirical_loss": loss, "sample_opt": sample_losses / m,
                "kept": len(result.kept), "degenerate": result.degenerate,
            },
        ), list(query_log_lines(log))

    return emit_trials(args, settings, run_trials("rlua-agnostic", config, 1, trial))


def cmd_wm(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses, u = problem.hypotheses, problem.u
    horizon = config.rounds or 50
    oracle = canonical_oracle(u)
    lit = littlestone_dimension(hypotheses)

    def trial(index, rng, seed):
        stream = sample_iid(problem.distribution, horizon, rng)
        opt, _ = stream_opt(hypotheses, stream, u)
        if args.experts:
            family = expert_family_size(lit, horizon)
            eta = config.eta if config.eta is not None else default_eta(family, horizon)
            run = wm_experts(
                hypotheses, stream, oracle, horizon, eta, config.expert_mode,
                settings.expert_family_cap, settings.expert_group_cap,
            )
        else:
            family = hypotheses.n_hypotheses
            eta = config.eta if config.eta is not None else default_eta(family, horizon)
            run = wm_finite(hypotheses, stream, eta, oracle)
        bound = finite_wm_bound(eta, opt, family)
        return TrialResult(
            suite="wm", scenario="custom", trial=index, seed=seed,
            mistakes=run.mistakes, opt=float(opt), bound=bound, queries=run.log.total,
            hard_violation=run.mistakes > bound + 1e-9,
            extra={"family_size": family, "eta": eta, "experts": bool(args.experts)},
        ), list(query_log_lines(run.log))

    return emit_trials(args, settings, run_trials("wm", config, 1, trial))


def cmd_game(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses, u = problem.hypotheses, problem.u
    lit = littlestone_dimension(hypotheses)
    rounds = config.rounds or 1000
    attacker = make_attacker(config.attacker, u, config.blindness)

    def trial(index, rng, seed):
        transcript = attack_game(soa(hypotheses), attacker, problem.distribution, u, rounds, rng, config.pretrain)
        return TrialResult(
            suite="game", scenario="custom", trial=index, seed=seed,
            mistakes=transcript.successes, bound=float(lit), hard_violation=transcript.successes > lit,
            extra={"attacker": attacker.kind, "rounds": rounds, "pretrain": config.pretrain},
        ), list(transcript_lines(transcript))

    return emit_trials(args, settings, run_trials("game", config, 1, trial))


def cmd_lowerbound(args, settings, config) -> int:
    d = config.d or 17
    strategy = config.strategy or StrategyKind.BINARY_SEARCH
    expected = math.log2(d - 1) / 2

    def game(index, rng, seed):
        log = QueryLog()
        state = threshold_lower_bound_game(strategy, d, rng, log=log)
        return TrialResult(
            suite="lowerbound", scenario=f"threshold-game-d{d}", trial=index, seed=seed,
            queries=state.queries, bound=expected,
            extra={"strategy": strategy.value, "secret": state.secret, "sizes": state.sizes},
        ), list(query_log_lines(log))

    def online(index, rng, seed):
        transcript = threshold_online_game(soa(lower_bound_class(d)), d, config.rounds or 4 * d, rng)
        return TrialResult(
            suite="lowerbound", scenario=f"threshold-online-d{d}", trial=index, seed=seed,
            mistakes=transcript.successes, bound=expected, extra={"rounds": len(transcript.rounds)},
        ), list(transcript_lines(transcript))

    results = run_trials("lowerbound-online" if args.online else "lowerbound", config, 100, online if args.online else game)
    measured = [r.mistakes if args.online else r.queries for r, _ in results]
    logger.info("lowerbound d=%d: mean %.3f over %d reps (log2(d-1)/2 = %.3f)", d, float(np.mean(measured)), len(measured), expected)
    return emit_trials(args, settings, results)


def cmd_imperfect(args, settings, config) -> int:
    problem = load_problem(args, settings)
    hypotheses = problem.hypotheses
    lit = littlestone_dimension(hypotheses)
    epsilon = config.epsilon or 0.2
    delta = config.delta or 0.2
    attacker = make_attacker(config.attacker, problem.u, config.blindness)
    _, cap = survivor_sample_size(lit, epsilon, delta)

    def trial(index, rng, seed):
        draw_rng, attack_rng = rng.spawn(2)
        try:
            result = survivor_learn(iid_stream(problem.distribution, draw_rng), soa(hypotheses), attacker, epsilon, delta, lit, attack_rng)
        except SurvivorFailure as exc:
            logger.warning("imperfect trial %d: %s", index, exc)
            return TrialResult(
                suite="imperfect", scenario="custom", trial=index, seed=seed,
                violation=True, extra={"failed": str(exc), "cap": cap},
            ), []
        error = attacker_error(result.predictor, attacker, problem.distribution).value
        return TrialResult(
            suite="imperfect", scenario="custom", trial=index, seed=seed,
            risk=error, mistakes=result.updates, bound=epsilon, violation=error > epsilon,
            hard_violation=result.updates > lit,
            extra={"rounds": result.rounds, "streak": result.streak, "cap": cap, "attacker": attacker.kind},
        ), []

    return emit_trials(args, settings, run_trials("imperfect", config, 1, trial))


def cmd_accept(args, settings, config) -> int:
    suites = list(SuiteId) if args.suite == "all" else [SuiteId(args.suite)]
    reports = []
    with open_output(args.out, settings) as handle:
        for suite in suites:
            outcome = run_acceptance(suite, config, settings, sink=lambda r: write_lines(handle, [r.model_dump_json()]))
            reports.append(outcome.report)
    with open_output(args.report, settings) as handle:
        write_lines(handle, (report.model_dump_json() for report in reports))
    failed = [report.suite.value for report in reports if report.verdict == Verdict.FAIL]
    if failed:
        logger.error("acceptance failed: %s", ", ".join(failed))
        return EXIT_FAILED
    return EXIT_OK


def cmd_attack_check(args, settings, config) -> int:
    u = read_perturbation(args.perturbation_file)
    with Path(args.log_file).open(encoding="utf-8") as lines:
        report = attack_check(lines, u)
    with open_output(args.out, settings) as handle:
        write_lines(handle, [report.model_dump_json()])
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_serve(args, settings, config) -> int:
    import uvicorn

    uvicorn.run("src.api.main:app", host=args.host, port=args.port, reload=args.reload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="graine maître (défaut : MASTER_SEED)")
    common.add_argument("--jobs", type=int, help="taille du pool de threads pour les essais")
    common.add_argument("--out", help="fichier de sortie JSON-lines (défaut : stdout)")
    common.add_argument("--config", help="fichier JSON d'ExperimentConfig ; les options priment")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return common


def _files(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("class_file", help="fichier de classe (instances <n> + lignes '+-')")
    parser.add_argument("perturbation_file", help="fichier de perturbations (u <x> : <z...>)")
    parser.add_argument("distribution_file", help="fichier de distribution (atom <x> <label> <prob>)")


def _trials(parser: argparse.ArgumentParser, log: bool = True) -> None:
    parser.add_argument("--trials", type=int, help="nombre d'essais")
    if log:
        parser.add_argument("--log-out", help="journal JSON-lines des requêtes / transcriptions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src",
        description="Apprentissage robuste avec oracles d'attaque sur des espaces finis",
    )
    common = _common()
    commands = parser.add_subparsers(dest="command", required=True)

    dims = commands.add_parser("dims", parents=[common], help="dimensions d'une classe (JSON)")
    dims.add_argument("class_file")
    dims.set_defaults(handler=cmd_dims)

    online = commands.add_parser("online-game", parents=[common], help="SOA sur une séquence (MistakeRecord)")
    online.add_argument("class_file")
    online.add_argument("sequence_file", help="une ligne 'ex <x> <label>' par tour")
    online.set_defaults(handler=cmd_online_game)

    cycle = commands.add_parser("cyclerobust", parents=[common], help="CycleRobust avec l'oracle parfait")
    _files(cycle)
    cycle.add_argument("--m", type=int)
    cycle.add_argument("--delta", type=float)
    _trials(cycle)
    cycle.set_defaults(handler=cmd_cyclerobust)

    for name, handler in (("rlua", cmd_rlua), ("rlua-agnostic", cmd_rlua_agnostic)):
        rlua = commands.add_parser(name, parents=[common], help="RLUA" if name == "rlua" else "réduction agnostique")
        _files(rlua)
        rlua.add_argument("--m", type=int)
        rlua.add_argument("--n", type=int, help="taille des sous-ensembles du pool")
        rlua.add_argument("--T", type=int, help="tours de boosting")
        rlua.add_argument("--N", type=int, help="votes gardés par la sparsification")
        rlua.add_argument("--delta", type=float)
        _trials(rlua)
        rlua.set_defaults(handler=handler)

    wm = commands.add_parser("wm", parents=[common], help="Weighted Majority avec l'oracle")
    _files(wm)
    wm.add_argument("--T", type=int, help="horizon")
    wm.add_argument("--eta", type=float)
    wm.add_argument("--experts", action="store_true", help="famille d'experts SOA au lieu des lignes de H")
    wm.add_argument("--expert-mode", choices=[mode.value for mode in ExpertMode])
    _trials(wm)
    wm.set_defaults(handler=cmd_wm)

    game = commands.add_parser("game", parents=[common], help="jeu d'attaque en ligne contre SOA")
    _files(game)
    game.add_argument("--T", type=int, help="nombre de tours")
    game.add_argument("--attacker", choices=[kind.value for kind in AttackerKind])
    game.add_argument("--blindness", type=float)
    game.add_argument("--pretrain", type=int, help="exemples propres donnés avant le jeu")
    _trials(game)
    game.set_defaults(handler=cmd_game)

    lower = commands.add_parser("lowerbound", parents=[common], help="jeu de borne inférieure sur les seuils")
    lower.add_argument("--d", type=int)
    lower.add_argument("--strategy", choices=[kind.value for kind in StrategyKind])
    lower.add_argument("--reps", dest="trials", type=int, help="secrets tirés (défaut 100)")
    lower.add_argument("--online", action="store_true", help="version jeu en ligne contre SOA")
    lower.add_argument("--T", type=int, help="tours du jeu en ligne (défaut 4d)")
    lower.add_argument("--log-out")
    lower.set_defaults(handler=cmd_lowerbound)

    imperfect = commands.add_parser("imperfect", parents=[common], help="apprenant survivant, attaquant imparfait")
    _files(imperfect)
    imperfect.add_argument("--eps", type=float)
    imperfect.add_argument("--delta", type=float)
    imperfect.add_argument("--attacker", choices=[kind.value for kind in AttackerKind])
    imperfect.add_argument("--blindness", type=float)
    _trials(imperfect, log=False)
    imperfect.set_defaults(handler=cmd_imperfect)

    accept = commands.add_parser("accept", parents=[common], help="suites d'acceptation")
    accept.add_argument("suite", choices=["all", *[suite.value for suite in SuiteId]])
    accept.add_argument("--trials", type=int, help="remplace le nombre d'essais par défaut")
    accept.add_argument("--report", help="rapports JSON (défaut : stdout)")
    accept.set_defaults(handler=cmd_accept)

    check = commands.add_parser("attack-check", parents=[common], help="revérifie un journal JSON-lines")
    check.add_argument("perturbation_file")
    check.add_argument("log_file")
    check.set_defaults(handler=cmd_attack_check)

    serve = commands.add_parser("serve", parents=[common], help="API HTTP (uvicorn)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--reload", action="store_true")
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(settings, args.log_level)
    try:
        config = load_config(args, settings)
        return args.handler(args, settings, config)
    except (RobustLearningError, ValueError, OSError) as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
