import math

import pytest

from src.models import HypothesisClass, LabeledExample, OracleResponse, PerturbationSet
from src.services import compression_service
from src.services.dimension_service import littlestone_dimension, sample_iid
from src.services.online_service import soa, soa_factory
from src.services.perturbation_service import ContractViolation, canonical_oracle, robust_losses


class ConstantOracle:
    """Oracle qui renvoie toujours la même instance, même quand elle n'est pas une erreur."""

    def __init__(self, z: int):
        self.z = z

    def query(self, predictor, example):
        return OracleResponse.perturbation(self.z)


class TestCycleRobust:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_zero_robust_loss_on_realizable_sample(self, threshold_scenario, seed):
        sample = sample_iid(threshold_scenario.distribution, 40, seed)
        learner = soa(threshold_scenario.hypotheses)
        oracle = canonical_oracle(threshold_scenario.u)

        predictor, record, log = compression_service.cycle_robust(sample, learner, oracle)

        lit = littlestone_dimension(threshold_scenario.hypotheses)
        assert robust_losses(predictor, sample, threshold_scenario.u).sum() == 0
        assert record.size <= lit
        assert record.passes <= lit + 1
        assert record.queries == log.total == record.passes * len(sample)
        assert log.total <= len(sample) * (lit + 1)

    def test_random_class_sample(self, random_scenario):
        sample = sample_iid(random_scenario.distribution, 30, 5)
        predictor, record, _ = compression_service.cycle_robust(
            sample, soa(random_scenario.hypotheses), canonical_oracle(random_scenario.u)
        )
        assert robust_losses(predictor, sample, random_scenario.u).sum() == 0
        assert record.size <= littlestone_dimension(random_scenario.hypotheses)

    def test_steps_carry_original_labels(self, threshold_scenario):
        sample = sample_iid(threshold_scenario.distribution, 25, 7)
        _, record, _ = compression_service.cycle_robust(
            sample, soa(threshold_scenario.hypotheses), canonical_oracle(threshold_scenario.u)
        )
        for step in record.steps:
            assert sample[step.origin].instance == step.origin_instance
            assert sample[step.origin].label == step.label
            assert threshold_scenario.u.contains(step.origin_instance, step.instance)

    def test_empty_sample_needs_one_pass(self, threshold_class, identity_perturbation):
        predictor, record, log = compression_service.cycle_robust(
            [], soa(threshold_class), canonical_oracle(identity_perturbation)
        )
        assert record.size == 0
        assert record.passes == 1
        assert log.total == 0
        assert predictor.same_labels(soa(threshold_class).predictor())

    def test_non_realizable_sample_raises(self):
        hypotheses = HypothesisClass.from_rows(["+-"])
        u = PerturbationSet.identity(2)
        with pytest.raises(compression_service.NonRealizableError) as excinfo:
            compression_service.cycle_robust([LabeledExample(0, -1)], soa(hypotheses), canonical_oracle(u))
        assert excinfo.value.record.size == 1
        assert excinfo.value.log.total == 1

    def test_non_conservative_learner_rejected(self, threshold_class, identity_perturbation):
        with pytest.raises(ValueError):
            compression_service.cycle_robust(
                [], soa(threshold_class, conservative=False), canonical_oracle(identity_perturbation)
            )

    def test_counterexample_without_mistake_is_a_contract_violation(self, threshold_class):
        # SOA predicts +1 on instance 0 for the whole class
        with pytest.raises(ContractViolation):
            compression_service.cycle_robust([LabeledExample(0, 1)], soa(threshold_class), ConstantOracle(0))


class TestCompressionScheme:
    def test_replay_reproduces_the_output(self, threshold_scenario):
        sample = sample_iid(threshold_scenario.distribution, 40, 9)
        factory = soa_factory(threshold_scenario.hypotheses)
        predictor, record, _ = compression_service.cycle_robust(
            sample, factory(), canonical_oracle(threshold_scenario.u)
        )
        assert compression_service.replay_compression(record, factory).same_labels(predictor)

    def test_stability_on_subsequences(self, random_scenario):
        sample = sample_iid(random_scenario.distribution, 20, 4)
        factory = soa_factory(random_scenario.hypotheses)
        oracle = canonical_oracle(random_scenario.u)
        _, record, _ = compression_service.cycle_robust(sample, factory(), oracle)
        assert compression_service.stability_check(sample, record, factory, oracle, draws=10, seed=1)


class TestBounds:
    def test_stable_bound_value(self):
        expected = 2 / 6 * (2 * math.log(4) + math.log(10))
        assert compression_service.stable_compression_bound(10, 2, 0.1) == pytest.approx(expected)

    def test_robust_bound_value(self):
        expected = 1 / 8 * (2 * math.log(10) + math.log(10))
        assert compression_service.robust_compression_bound(10, 2, 0.1) == pytest.approx(expected)

    @pytest.mark.parametrize("m, k", [(4, 2), (3, 2)])
    def test_stable_bound_needs_room(self, m, k):
        with pytest.raises(ValueError):
            compression_service.stable_compression_bound(m, k, 0.1)

    def test_robust_bound_needs_room(self):
        with pytest.raises(ValueError):
            compression_service.robust_compression_bound(2, 2, 0.1)

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            compression_service.stable_compression_bound(100, 1, 1.5)

    @pytest.mark.parametrize("lit, epsilon, delta", [(1, 0.1, 0.05), (3, 0.2, 0.1), (0, 0.5, 0.5)])
    def test_sample_size_is_minimal(self, lit, epsilon, delta):
        m = compression_service.cyclerobust_sample_size(lit, epsilon, delta)
        assert m > 2 * lit
        assert compression_service.stable_compression_bound(m, lit, delta) <= epsilon
        if m - 1 > 2 * lit:
            assert compression_service.stable_compression_bound(m - 1, lit, delta) > epsilon
