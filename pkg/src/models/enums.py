"""
Enums partagés par les services, la CLI et l'API.
"""
from enum import Enum


class ScenarioKind(str, Enum):
    """Familles de scénarios générés par le harness."""
    THRESHOLDS = "thresholds"
    RANDOM_CLASS = "random-class"
    FULL_CUBE = "full-cube"
    CUSTOM = "custom"


class AttackerKind(str, Enum):
    """Attaquants livrés pour le jeu en ligne et le modèle imparfait."""
    IDENTITY = "identity"        # renvoie toujours x
    UNIFORM = "uniform"          # z uniforme dans U(x)
    GREEDY = "greedy"            # premier z mal classé, ordre croissant
    GREEDY_LAST = "greedy-last"  # premier z mal classé, ordre décroissant
    EPS_BLIND = "eps-blind"      # glouton, sauf avec probabilité p : identité


class StrategyKind(str, Enum):
    """Stratégies de requêtes pour le jeu de borne inférieure sur les seuils."""
    BINARY_SEARCH = "binary-search"
    SOA = "soa"
    RANDOM = "random"


class ExpertMode(str, Enum):
    """Représentation de la famille d'experts du Weighted Majority."""
    GROUPED = "grouped"
    MATERIALIZED = "materialized"


class SuiteId(str, Enum):
    """Suites d'acceptation exécutables par `accept <suite>`."""
    DIMENSIONS = "dimensions"
    CYCLEROBUST = "cyclerobust"
    CYCLEROBUST_GENERALIZATION = "cyclerobust-generalization"
    RLUA = "rlua"
    AGNOSTIC_REDUCTION = "agnostic-reduction"
    SOA_MISTAKE_BOUND = "soa-mistake-bound"
    WM_REGRET = "wm-regret"
    ONLINE_TO_BATCH = "online-to-batch"
    ATTACK_GAME = "attack-game"
    THRESHOLD_LOWER_BOUND = "threshold-lower-bound"
    IMPERFECT_ATTACKER = "imperfect-attacker"
    DETERMINISM = "determinism"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
