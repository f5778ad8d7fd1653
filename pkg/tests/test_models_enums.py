"""
Tests for enum types shared by the services, the CLI and the API.
"""
from src.models import AttackerKind, ExpertMode, ScenarioKind, StrategyKind, SuiteId, Verdict


class TestEnums:
    """Test suite for all enum types."""

    def test_scenario_kind_values(self):
        expected_values = {"thresholds", "random-class", "full-cube", "custom"}
        actual_values = {kind.value for kind in ScenarioKind}
        assert actual_values == expected_values, f"ScenarioKind values mismatch: {actual_values}"

    def test_attacker_kind_values(self):
        expected_values = {"identity", "uniform", "greedy", "greedy-last", "eps-blind"}
        assert {kind.value for kind in AttackerKind} == expected_values

    def test_strategy_kind_values(self):
        assert {kind.value for kind in StrategyKind} == {"binary-search", "soa", "random"}

    def test_suite_ids_cover_every_acceptance_criterion(self):
        """Verify every acceptance battery has a runnable suite id."""
        expected_values = {
            "dimensions", "cyclerobust", "cyclerobust-generalization", "rlua",
            "agnostic-reduction", "soa-mistake-bound", "wm-regret", "online-to-batch",
            "attack-game", "threshold-lower-bound", "imperfect-attacker", "determinism",
        }
        assert {suite.value for suite in SuiteId} == expected_values

    def test_enums_are_strings(self):
        """Verify all enums inherit from str (JSON and argparse friendly)."""
        assert isinstance(ScenarioKind.THRESHOLDS, str)
        assert isinstance(AttackerKind.GREEDY, str)
        assert isinstance(ExpertMode.GROUPED, str)
        assert isinstance(Verdict.PASS, str)
        assert SuiteId("wm-regret") is SuiteId.WM_REGRET
