"""
Formats de fichiers texte (classes, perturbations, distributions), journaux
JSON-lines et revérification hors ligne des réponses d'oracle.

Lignes vides et commentaires '#' sont ignorés dans les fichiers texte.
"""
import logging
import math
from pathlib import Path
from typing import Iterable, Iterator, Union

import numpy as np
from pydantic import ValidationError

from src.models.base import RobustLearningError
from src.models.perturbation import PerturbationSet, QueryLog
from src.models.records import GameTranscript
from src.models.universe import FiniteDistribution, HypothesisClass, LabeledExample
from src.schemas.experiment import AttackCheckEntry, AttackCheckReport, QueryLogLine, TranscriptLine

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class FormatError(RobustLearningError):
    """Raised when a text or JSON-lines file is malformed."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line


def _header(lines: list[tuple[int, str]]) -> int:
    if not lines:
        raise FormatError("empty file")
    number, first = lines[0]
    parts = first.split()
    if len(parts) != 2 or parts[0] != "instances" or not parts[1].isdigit() or int(parts[1]) < 1:
        raise FormatError(f"expected 'instances <n>', got {first!r}", number)
    return int(parts[1])


def _label(token: str, number: int) -> int:
    if token in ("+", "+1", "1"):
        return 1
    if token in ("-", "-1"):
        return -1
    raise FormatError(f"invalid label {token!r}", number)


def parse_class(text: str) -> HypothesisClass:
    """
    `instances <n>` puis une ligne '+-' de longueur n par hypothèse.

    Raises:
        FormatError: en-tête absent, ligne de mauvaise longueur, classe invalide.
    """
    lines = list(_content_lines(text))
    n = _header(lines)
    rows = []
    for number, row in lines[1:]:
        if len(row) != n:
            raise FormatError(f"hypothesis row has {len(row)} labels, expected {n}", number)
        rows.append(row)
    try:
        return HypothesisClass.from_rows(rows)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def format_class(hypotheses: HypothesisClass) -> str:
    rows = [hypotheses.row_string(row) for row in range(hypotheses.n_hypotheses)]
    return "\n".join([f"instances {hypotheses.n_instances}", *rows]) + "\n"


def parse_perturbation(text: str) -> PerturbationSet:
    """
    `instances <n>` puis une ligne `u <x> : <z1> <z2> ...` par instance.

    Raises:
        FormatError: instance absente ou répétée, cible invalide.
    """
    lines = list(_content_lines(text))
    n = _header(lines)
    sets: dict[int, list[int]] = {}
    for number, line in lines[1:]:
        head, sep, tail = line.partition(":")
        parts = head.split()
        if not sep or len(parts) != 2 or parts[0] != "u":
            raise FormatError(f"expected 'u <x> : <z...>', got {line!r}", number)
        try:
            x = int(parts[1])
            targets = [int(z) for z in tail.split()]
        except ValueError as exc:
            raise FormatError(f"non-integer instance in {line!r}", number) from exc
        if x in sets:
            raise FormatError(f"U({x}) defined twice", number)
        sets[x] = targets
    missing = sorted(set(range(n)) - set(sets))
    if missing or len(sets) != n:
        raise FormatError(f"perturbation file must define U(x) for x in 0..{n - 1} (missing {missing})")
    try:
        return PerturbationSet([sets[x] for x in range(n)])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def format_perturbation(u: PerturbationSet) -> str:
    lines = [f"instances {u.n_instances}"]
    lines.extend(f"u {x} : {' '.join(str(z) for z in u[x])}" for x in range(u.n_instances))
    return "\n".join(lines) + "\n"


def parse_distribution(text: str) -> FiniteDistribution:
    """
    Une ligne `atom <x> <label> <prob>` par atome ; somme à 1 (à 1e-9 près).

    Raises:
        FormatError: ligne invalide, atome répété ou somme incorrecte.
    """
    examples, weights = [], []
    for number, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 4 or parts[0] != "atom":
            raise FormatError(f"expected 'atom <x> <label> <prob>', got {line!r}", number)
        try:
            example = LabeledExample(int(parts[1]), _label(parts[2], number))
            probability = float(parts[3])
        except ValueError as exc:
            raise FormatError(str(exc), number) from exc
        if probability < 0 or not math.isfinite(probability):
            raise FormatError(f"invalid probability {parts[3]!r}", number)
        examples.append(example)
        weights.append(probability)
    if not examples:
        raise FormatError("distribution file has no atoms")
    total = math.fsum(weights)
    if abs(total - 1.0) > 1e-9:
        raise FormatError(f"atom probabilities sum to {total!r}, expected 1")
    try:
        return FiniteDistribution.from_weights(examples, weights)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def format_distribution(distribution: FiniteDistribution) -> str:
    return "".join(
        f"atom {example.instance} {example.label:+d} {probability!r}\n"
        for example, probability in distribution.atoms
    )


def parse_sequence(text: str) -> list[LabeledExample]:
    """Une ligne `ex <x> <label>` par tour, dans l'ordre du flux."""
    sequence = []
    for number, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 3 or parts[0] != "ex":
            raise FormatError(f"expected 'ex <x> <label>', got {line!r}", number)
        try:
            sequence.append(LabeledExample(int(parts[1]), _label(parts[2], number)))
        except ValueError as exc:
            raise FormatError(str(exc), number) from exc
    return sequence


def format_sequence(sequence: Iterable[LabeledExample]) -> str:
    return "".join(f"ex {example.instance} {example.label:+d}\n" for example in sequence)


def read_class(path: PathLike) -> HypothesisClass:
    return parse_class(Path(path).read_text(encoding="utf-8"))


def read_perturbation(path: PathLike) -> PerturbationSet:
    return parse_perturbation(Path(path).read_text(encoding="utf-8"))


def read_distribution(path: PathLike) -> FiniteDistribution:
    return parse_distribution(Path(path).read_text(encoding="utf-8"))


def read_sequence(path: PathLike) -> list[LabeledExample]:
    return parse_sequence(Path(path).read_text(encoding="utf-8"))


def _table_string(table) -> str:
    return "".join("+" if v > 0 else "-" for v in table)


def query_log_lines(log: QueryLog) -> Iterator[str]:
    """Une ligne JSON par requête, dans l'ordre d'émission."""
    for index, entry in enumerate(log):
        yield QueryLogLine(
            index=index,
            stage=entry.stage,
            fingerprint=entry.fingerprint,
            table=_table_string(entry.table),
            instance=entry.example.instance,
            label=entry.example.label,
            counterexample=entry.response.counterexample,
        ).model_dump_json()


def transcript_lines(transcript: GameTranscript) -> Iterator[str]:
    for number, game_round in enumerate(transcript.rounds):
        yield TranscriptLine(
            round=number,
            instance=game_round.instance,
            label=game_round.label,
            perturbation=game_round.perturbation,
            prediction=game_round.prediction,
            success=game_round.success,
            fingerprint=game_round.fingerprint,
        ).model_dump_json()


def _check_query(entry: QueryLogLine, u: PerturbationSet, seen: dict[str, str]) -> str | None:
    if len(entry.table) != u.n_instances or set(entry.table) - {"+", "-"}:
        return f"table does not cover {u.n_instances} instances"
    if not 0 <= entry.instance < u.n_instances:
        return f"instance {entry.instance} out of range"
    known = seen.setdefault(entry.fingerprint, entry.table)
    if known != entry.table:
        return f"fingerprint {entry.fingerprint} seen with two different tables"
    wanted = "+" if entry.label > 0 else "-"
    if entry.counterexample is None:
        wrong = [z for z in u[entry.instance] if entry.table[z] != wanted]
        if wrong:
            return f"certified robust but {wrong[0]} in U({entry.instance}) is misclassified"
        return None
    z = entry.counterexample
    if not u.contains(entry.instance, z):
        return f"counterexample {z} not in U({entry.instance})"
    if entry.table[z] == wanted:
        return f"counterexample {z} is correctly classified"
    return None


def _check_round(entry: TranscriptLine, u: PerturbationSet) -> str | None:
    if not 0 <= entry.instance < u.n_instances:
        return f"instance {entry.instance} out of range"
    if entry.success != (entry.prediction != entry.label):
        return "success flag disagrees with prediction and label"
    if not u.contains(entry.instance, entry.perturbation) and entry.perturbation != entry.instance:
        return f"perturbation {entry.perturbation} not in U({entry.instance})"
    return None


def attack_check(lines: Iterable[str], u: PerturbationSet) -> AttackCheckReport:
    """
    Revérifie hors ligne un journal de requêtes ou une transcription de jeu.

    Contrôles : appartenance z ∈ U(x), erreur effective sur z, exhaustivité
    des certificats, cohérence empreinte ↔ table.
    """
    seen: dict[str, str] = {}
    failures: list[AttackCheckEntry] = []
    entries = 0
    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        entries += 1
        try:
            if '"counterexample"' in raw or '"table"' in raw:
                reason = _check_query(QueryLogLine.model_validate_json(raw), u, seen)
            else:
                reason = _check_round(TranscriptLine.model_validate_json(raw), u)
        except ValidationError as exc:
            reason = f"malformed entry: {exc.error_count()} validation error(s)"
        if reason is not None:
            failures.append(AttackCheckEntry(line=number, ok=False, reason=reason))
    if failures:
        logger.warning("attack-check: %d of %d entries failed", len(failures), entries)
    return AttackCheckReport(entries=entries, verified=entries - len(failures), failures=failures)


def verify_log(log: QueryLog, u: PerturbationSet) -> bool:
    """Mêmes contrôles qu'attack_check, directement sur un journal en mémoire."""
    seen: dict[str, bytes] = {}
    for entry in log:
        table = entry.table
        if seen.setdefault(entry.fingerprint, table.tobytes()) != table.tobytes():
            return False
        x, y = entry.example.instance, entry.example.label
        z = entry.response.counterexample
        if z is None:
            if np.any(table[u.array(x)] != y):
                return False
        elif not u.contains(x, z) or table[z] == y:
            return False
    return True
