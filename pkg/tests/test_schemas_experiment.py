"""
Tests for the experiment config and report schemas.
"""
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st
from pydantic import ValidationError

from src.models import AttackerKind, ExpertMode, ScenarioKind, StrategyKind, SuiteId
from src.schemas import AcceptanceReport, Criterion, ExperimentConfig

pytestmark = pytest.mark.unit

unit_interval = st.floats(min_value=0, max_value=1, exclude_min=True, exclude_max=True)
param_values = st.one_of(
    st.integers(min_value=-(2 ** 53), max_value=2 ** 53),
    st.booleans(),
    st.text(max_size=8),
    st.floats(allow_nan=False, allow_infinity=False),
    st.lists(st.integers(min_value=0, max_value=64), max_size=4),
)

configs = st.builds(
    ExperimentConfig,
    scenario=st.none() | st.sampled_from(ScenarioKind),
    scenario_params=st.dictionaries(st.text(min_size=1, max_size=6), param_values, max_size=4),
    realizable=st.none() | st.booleans(),
    class_file=st.none() | st.text(min_size=1, max_size=12),
    m=st.none() | st.integers(min_value=1, max_value=100_000),
    n=st.none() | st.integers(min_value=1, max_value=16),
    rounds=st.none() | st.integers(min_value=1, max_value=100_000),
    votes=st.none() | st.integers(min_value=1, max_value=100_000),
    eta=st.none() | st.floats(min_value=0, max_value=1, exclude_max=True),
    epsilon=st.none() | unit_interval,
    delta=st.none() | unit_interval,
    trials=st.none() | st.integers(min_value=1, max_value=1_000_000),
    seed=st.integers(min_value=0, max_value=2 ** 63),
    jobs=st.integers(min_value=1, max_value=256),
    attacker=st.sampled_from(AttackerKind),
    blindness=st.floats(min_value=0, max_value=1),
    strategy=st.none() | st.sampled_from(StrategyKind),
    d=st.none() | st.integers(min_value=3, max_value=4096),
    expert_mode=st.sampled_from(ExpertMode),
    pretrain=st.integers(min_value=0, max_value=1000),
)


class TestExperimentConfig:
    @given(configs)
    @hypothesis_settings(max_examples=200, deadline=None)
    def test_json_round_trip_is_byte_identical(self, config):
        dumped = config.model_dump_json()
        restored = ExperimentConfig.model_validate_json(dumped)
        assert restored.model_dump_json() == dumped
        assert restored == config

    def test_round_trip_keeps_thirds(self):
        config = ExperimentConfig(delta=1 / 3, epsilon=1 / 18, eta=2 / 3, strategy=StrategyKind.SOA)
        restored = ExperimentConfig.model_validate_json(config.model_dump_json())
        assert restored.delta == 1 / 3
        assert restored.strategy is StrategyKind.SOA

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate_json('{"trails": 3}')

    @pytest.mark.parametrize("field, value", [("delta", 0), ("delta", 1), ("eta", 1), ("jobs", 0), ("d", 2)])
    def test_out_of_range_values_rejected(self, field, value):
        with pytest.raises(ValidationError):
            ExperimentConfig(**{field: value})


class TestAcceptanceReport:
    def test_verdict_follows_criteria(self):
        passing = Criterion(name="a", description="", observed=0, threshold=0, trials=1, passed=True)
        failing = passing.model_copy(update={"passed": False})
        assert AcceptanceReport(suite=SuiteId.WM_REGRET, seed=1, trials=1, criteria=[passing]).verdict.value == "pass"
        report = AcceptanceReport(suite=SuiteId.WM_REGRET, seed=1, trials=1, criteria=[passing, failing])
        assert report.model_dump()["verdict"].value == "fail"
