import math

import numpy as np
import pytest

from src.models import HypothesisClass, LabeledExample, PerturbationSet, QueryLog
from src.services import rlua_service
from src.services.dimension_service import sample_iid
from src.services.online_service import soa_factory
from src.services.perturbation_service import canonical_oracle, robust_losses
from src.services.scenario_service import reference_patterns


@pytest.fixture
def threshold_sample(threshold_scenario):
    return sample_iid(threshold_scenario.distribution, 8, 21)


class TestDefaults:
    def test_rounds(self):
        assert rlua_service.default_rounds(1) == 1
        assert rlua_service.default_rounds(10) == math.ceil(112 * math.log(10))

    def test_alpha(self):
        assert rlua_service.default_alpha(1, 1) == 0.0
        expected = 0.5 * math.log(1 + math.sqrt(2 * math.log(10) / 258))
        assert rlua_service.default_alpha(10, 258) == pytest.approx(expected)

    @pytest.mark.parametrize("dual_vc, expected", [(0, 356), (1, 680)])
    def test_votes(self, dual_vc, expected):
        assert rlua_service.default_votes(dual_vc) == expected

    def test_subset_size_bounded_by_sample(self, threshold_class):
        factory = soa_factory(threshold_class)
        assert rlua_service.default_subset_size(factory, 2) == 2
        assert rlua_service.default_subset_size(factory, 100) >= 5

    def test_sauer_envelope(self):
        assert rlua_service.sauer_envelope(3, 1) == 8
        assert rlua_service.sauer_envelope(4, 0) == 2
        assert rlua_service.sauer_power_bound(4, 0) == 1.0
        assert rlua_service.sauer_power_bound(4, 2) == pytest.approx((math.e * 2) ** 2)


class TestPool:
    def test_members_are_robust_on_their_subset(self, threshold_scenario, threshold_sample):
        pool = rlua_service.build_pool(
            threshold_sample, 3, soa_factory(threshold_scenario.hypotheses), canonical_oracle(threshold_scenario.u)
        )
        assert len(pool.subset_index) == math.comb(len(threshold_sample), 3)
        assert pool.size <= len(pool.subset_index)
        for subset, position in pool.subset_index.items():
            examples = [threshold_sample[i] for i in subset]
            assert robust_losses(pool.members[position], examples, threshold_scenario.u).sum() == 0

    def test_members_are_distinct(self, threshold_scenario, threshold_sample):
        pool = rlua_service.build_pool(
            threshold_sample, 2, soa_factory(threshold_scenario.hypotheses), canonical_oracle(threshold_scenario.u)
        )
        assert len({member.table.tobytes() for member in pool.members}) == pool.size

    def test_cache_skips_work_but_charges_queries(self, threshold_scenario, threshold_sample):
        """Un pool servi par le cache ne relance pas l'apprenant mais compte les mêmes requêtes."""
        calls = []

        def factory():
            calls.append(1)
            return soa_factory(threshold_scenario.hypotheses)()

        oracle = canonical_oracle(threshold_scenario.u)
        cache = {}
        first_log, second_log = QueryLog(), QueryLog()
        first = rlua_service.build_pool(threshold_sample, 2, factory, oracle, log=first_log, cache=cache)
        built = len(calls)
        second = rlua_service.build_pool(threshold_sample, 2, factory, oracle, log=second_log, cache=cache)

        assert built == math.comb(len(threshold_sample), 2)
        assert len(calls) == built
        assert first.queries > 0
        assert second.queries == first.queries
        assert [e.fingerprint for e in second_log] == [e.fingerprint for e in first_log]
        assert np.array_equal(first.tables, second.tables)

    def test_query_count_independent_of_cache_state(self, threshold_scenario, threshold_sample):
        factory = soa_factory(threshold_scenario.hypotheses)
        oracle = canonical_oracle(threshold_scenario.u)
        warm = {}
        rlua_service.build_pool(threshold_sample[:5], 2, factory, oracle, cache=warm)
        cold = rlua_service.build_pool(threshold_sample, 2, factory, oracle)
        reused = rlua_service.build_pool(threshold_sample, 2, factory, oracle, cache=warm)
        assert reused.queries == cold.queries

    def test_parallel_pool_matches_sequential(self, threshold_scenario, threshold_sample):
        factory = soa_factory(threshold_scenario.hypotheses)
        oracle = canonical_oracle(threshold_scenario.u)
        sequential = rlua_service.build_pool(threshold_sample, 3, factory, oracle)
        parallel = rlua_service.build_pool(threshold_sample, 3, factory, oracle, jobs=4)
        assert np.array_equal(sequential.tables, parallel.tables)
        assert sequential.subset_index == parallel.subset_index

    @pytest.mark.parametrize("size", [0, 9])
    def test_invalid_subset_size(self, threshold_scenario, threshold_sample, size):
        with pytest.raises(ValueError):
            rlua_service.build_pool(
                threshold_sample, size, soa_factory(threshold_scenario.hypotheses), canonical_oracle(threshold_scenario.u)
            )


class TestDiscretize:
    def test_patterns_match_exhaustive_enumeration(self, threshold_scenario, threshold_sample):
        oracle = canonical_oracle(threshold_scenario.u)
        pool = rlua_service.build_pool(threshold_sample, 2, soa_factory(threshold_scenario.hypotheses), oracle)
        dset = rlua_service.discretize(threshold_sample, pool, oracle)

        assert dset.patterns == reference_patterns(pool.tables, threshold_sample, threshold_scenario.u)
        assert dset.size == len(dset.patterns)
        assert dset.probe_queries == len(threshold_sample)

    def test_random_scenario_patterns(self, random_scenario):
        sample = sample_iid(random_scenario.distribution, 6, 2)
        oracle = canonical_oracle(random_scenario.u)
        pool = rlua_service.build_pool(sample, 2, soa_factory(random_scenario.hypotheses), oracle)
        dset = rlua_service.discretize(sample, pool, oracle)
        assert dset.patterns == reference_patterns(pool.tables, sample, random_scenario.u)
        for point in dset.points:
            assert random_scenario.u.contains(sample[point.origin].instance, point.instance)
            assert point.label == sample[point.origin].label


@pytest.mark.integration
class TestRluaLearn:
    def test_full_pipeline_on_thresholds(self, threshold_scenario, threshold_sample):
        result = rlua_service.rlua_learn(
            threshold_sample,
            soa_factory(threshold_scenario.hypotheses),
            canonical_oracle(threshold_scenario.u),
            rlua_service.RluaConfig(),
            np.random.default_rng(0),
        )

        assert robust_losses(result.predictor, threshold_sample, threshold_scenario.u).sum() == 0
        assert result.run.margin >= rlua_service.MARGIN - 1e-12
        assert len(result.compression) == result.subset_size * result.votes
        assert result.dset.size <= result.sauer_envelope
        assert all(r.weighted_error <= rlua_service.WEAK_ERROR for r in result.run.rounds)
        assert result.log.counts_by_stage().keys() >= {"pool", "probe", "discretize", "sparsify"}

    def test_empty_sample_rejected(self, threshold_class, identity_perturbation):
        with pytest.raises(ValueError):
            rlua_service.rlua_learn(
                [], soa_factory(threshold_class), canonical_oracle(identity_perturbation),
                rlua_service.RluaConfig(), np.random.default_rng(0),
            )


class TestAlphaBoost:
    @pytest.mark.integration
    def test_default_run_reaches_the_margin(self, threshold_scenario, threshold_sample):
        factory = soa_factory(threshold_scenario.hypotheses)
        oracle = canonical_oracle(threshold_scenario.u)
        pool = rlua_service.build_pool(
            threshold_sample, rlua_service.default_subset_size(factory, len(threshold_sample)), factory, oracle
        )
        dset = rlua_service.discretize(threshold_sample, pool, oracle)
        run = rlua_service.alpha_boost(dset, threshold_sample, pool, np.random.default_rng(4))

        assert run.length == rlua_service.default_rounds(dset.size)
        assert run.alpha == pytest.approx(rlua_service.default_alpha(dset.size, run.length))
        assert run.margin >= rlua_service.MARGIN - 1e-12
        assert np.allclose(run.distributions.sum(axis=1), 1.0)
        assert all(r.weighted_error <= rlua_service.WEAK_ERROR for r in run.rounds)

    def test_retry_cap_exhausted(self, threshold_scenario, threshold_sample):
        oracle = canonical_oracle(threshold_scenario.u)
        pool = rlua_service.build_pool(threshold_sample, 2, soa_factory(threshold_scenario.hypotheses), oracle)
        dset = rlua_service.discretize(threshold_sample, pool, oracle)
        with pytest.raises(rlua_service.BoostFailure):
            rlua_service.alpha_boost(dset, threshold_sample, pool, np.random.default_rng(0), retry_cap=0)


class TestBoostConfidence:
    def test_consistent_sample_gives_zero_weak_errors(self, threshold_class, identity_perturbation):
        sample = [LabeledExample(0, 1)] * 3
        result = rlua_service.boost_confidence(
            sample,
            soa_factory(threshold_class),
            canonical_oracle(identity_perturbation),
            rlua_service.RluaConfig(),
            np.random.default_rng(5),
            rounds=3,
            weak_sample_size=2,
        )
        assert result.weak_errors == [0.0, 0.0, 0.0]
        assert result.attempts == [1, 1, 1]
        assert result.predictor(0) == 1
        assert result.log.counts_by_stage()["confidence"] == 3 * len(sample) + len(sample)

    def test_empty_sample_rejected(self, threshold_class, identity_perturbation):
        with pytest.raises(ValueError):
            rlua_service.boost_confidence(
                [], soa_factory(threshold_class), canonical_oracle(identity_perturbation),
                rlua_service.RluaConfig(), np.random.default_rng(0),
            )


class TestAgnosticReduction:
    def test_is_realizable(self, threshold_class, identity_perturbation):
        factory = soa_factory(threshold_class)
        oracle = canonical_oracle(identity_perturbation)
        assert rlua_service.is_realizable([LabeledExample(2, 1), LabeledExample(5, -1)], factory, oracle)
        assert not rlua_service.is_realizable([LabeledExample(2, 1), LabeledExample(2, -1)], factory, oracle)
        assert not rlua_service.is_realizable([LabeledExample(5, 1), LabeledExample(2, -1)], factory, oracle)

    def test_degenerate_case_returns_constant(self):
        hypotheses = HypothesisClass.from_rows(["+-"])
        result = rlua_service.agnostic_reduce(
            [LabeledExample(0, -1)],
            soa_factory(hypotheses),
            canonical_oracle(PerturbationSet.identity(2)),
            rlua_service.RluaConfig(),
            np.random.default_rng(0),
        )
        assert result.degenerate
        assert result.kept == ()
        assert result.confidence is None
        assert result.predictor.table.tolist() == [1, 1]

    @pytest.mark.slow
    def test_keeps_a_largest_realizable_subsequence(self, threshold_class, identity_perturbation):
        sample = [LabeledExample(0, 1), LabeledExample(0, 1), LabeledExample(0, -1)]
        result = rlua_service.agnostic_reduce(
            sample,
            soa_factory(threshold_class),
            canonical_oracle(identity_perturbation),
            rlua_service.RluaConfig(),
            np.random.default_rng(1),
        )
        assert result.kept == (0, 1)
        assert not result.degenerate
        assert result.predictor(0) == 1
        assert all(error <= rlua_service.WEAK_ERROR for error in result.confidence.weak_errors)
