#!/usr/bin/env python3
"""Script pour écrire les fichiers d'un scénario généré.

Produit class.txt, perturbation.txt et distribution.txt dans le dossier
cible, au format lu par la CLI (`python -m src cyclerobust ...`).
Il est idempotent : une même graine réécrit les mêmes octets.

Usage:
    python scripts/make_scenario_files.py thresholds data/thresholds --seed 3 --param n=8
"""

import argparse
import json
import sys
from pathlib import Path

# Ajouter le répertoire parent au path pour les imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.models.enums import ScenarioKind
from src.services.scenario_service import generate_scenario
from src.services.serialization_service import format_class, format_distribution, format_perturbation


def parse_param(text: str) -> tuple[str, object]:
    key, _, value = text.partition("=")
    return key, json.loads(value)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=[kind.value for kind in ScenarioKind if kind != ScenarioKind.CUSTOM])
    parser.add_argument("target", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--param", action="append", type=parse_param, default=[], help="clé=valeur JSON")
    parser.add_argument("--agnostic", action="store_true", help="autorise un scénario non réalisable")
    args = parser.parse_args()

    scenario = generate_scenario(args.kind, dict(args.param), args.seed, realizable=not args.agnostic)
    args.target.mkdir(parents=True, exist_ok=True)
    (args.target / "class.txt").write_text(format_class(scenario.hypotheses), encoding="utf-8")
    (args.target / "perturbation.txt").write_text(format_perturbation(scenario.u), encoding="utf-8")
    (args.target / "distribution.txt").write_text(format_distribution(scenario.distribution), encoding="utf-8")
    print(f"✅ {scenario.kind.value} scenario written to {args.target} (realizable={scenario.realizable})")
