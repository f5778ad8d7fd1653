import math

import numpy as np
import pytest

from src.models import ExpertMode, LabeledExample
from src.models.records import ExpertSpec
from src.services import weighted_majority_service as wm
from src.services.dimension_service import littlestone_dimension, make_threshold_class
from src.services.perturbation_service import canonical_oracle, robust_risk
from src.services.scenario_service import neighbor_perturbation, random_class, random_perturbation

TOLERANCE = 1e-9


def noisy_stream(n_instances: int, length: int, seed: int) -> list[LabeledExample]:
    rng = np.random.default_rng(seed)
    xs = rng.integers(n_instances, size=length)
    ys = rng.choice((-1, 1), size=length)
    return [LabeledExample(int(x), int(y)) for x, y in zip(xs, ys)]


class TestConstants:
    def test_regret_constants(self):
        a, b = wm.regret_constants(0.5)
        assert a == pytest.approx(math.log(2) / math.log(4 / 3))
        assert b == pytest.approx(1 / math.log(4 / 3))

    @pytest.mark.parametrize("eta", [0.0, 1.0, -0.5])
    def test_regret_constants_reject_eta(self, eta):
        with pytest.raises(ValueError):
            wm.regret_constants(eta)

    def test_default_eta(self):
        assert wm.default_eta(1, 10) == pytest.approx(0.9)
        assert wm.default_eta(1000, 10) == pytest.approx(0.5)
        assert wm.default_eta(10, 100) == pytest.approx(1 - 2 * math.log(10) / 100)

    def test_expert_regret_bound(self):
        assert wm.expert_regret_bound(0, 50) == 0
        assert wm.expert_regret_bound(4, math.e) == pytest.approx(16)


class TestExpertFamily:
    @pytest.mark.parametrize("lit, horizon", [(0, 5), (1, 5), (2, 6), (3, 4)])
    def test_family_size_matches_enumeration(self, lit, horizon):
        family = wm.make_expert_family(lit, horizon)
        assert len(family) == wm.expert_family_size(lit, horizon)
        assert len(set(family)) == len(family)

    def test_family_cap(self):
        with pytest.raises(wm.ExpertFamilyTooLarge):
            wm.make_expert_family(3, 100, cap=1000)

    def test_expert_spec_validation(self):
        with pytest.raises(ValueError):
            ExpertSpec((2, 2), 5)
        with pytest.raises(ValueError):
            ExpertSpec((6,), 5)

    def test_unflipped_expert_follows_soa_on_its_own_predictions(self, threshold_class):
        spec = ExpertSpec((), 4)
        runner = wm.ExpertRunner(spec, threshold_class)
        first = runner.predict(5)
        runner.advance(5)
        assert runner.version_space == threshold_class.restrict(threshold_class.full_mask, 5, first)
        assert wm.expert_predict(spec, threshold_class, [(5, 1)], 2, 3) == runner.predict(3)

    def test_flipped_expert_inverts_its_round(self, threshold_class):
        plain = wm.ExpertRunner(ExpertSpec((), 3), threshold_class)
        flipped = wm.ExpertRunner(ExpertSpec((1,), 3), threshold_class)
        assert np.array_equal(flipped.table(), -plain.table())

    def test_expert_predict_checks_round(self, threshold_class):
        with pytest.raises(ValueError):
            wm.expert_predict(ExpertSpec((), 4), threshold_class, [], 3, 0)


class TestFiniteWM:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_mistakes_within_bound_and_weights_contract(self, seed):
        rng = np.random.default_rng(seed)
        hypotheses = random_class(5, 10, rng)
        u = random_perturbation(5, 2, rng)
        stream = noisy_stream(5, 30, seed)
        eta = wm.default_eta(hypotheses.n_hypotheses, len(stream))

        run = wm.wm_finite(hypotheses, stream, eta, canonical_oracle(u))

        opt, _ = wm.stream_opt(hypotheses, stream, u)
        assert run.mistakes <= wm.finite_wm_bound(eta, opt, hypotheses.n_hypotheses) + TOLERANCE
        assert all(r <= (1 + eta) / 2 * (1 + TOLERANCE) for r in run.contraction_ratios)
        assert run.best_log_weight >= opt * math.log(eta) - TOLERANCE
        assert len(run.predictors) == len(stream) == run.log.total
        assert run.state.mistakes == run.mistakes

    def test_halving_on_realizable_stream(self, threshold_class):
        u = neighbor_perturbation(8, 1)
        # the target threshold row 4 is robustly correct away from its boundary
        stream = [LabeledExample(x, 1 if x <= 4 else -1) for x in (0, 7, 2, 6, 1, 5, 3)]
        opt, _ = wm.stream_opt(threshold_class, stream, u)
        assert opt == 0

        run = wm.wm_finite(threshold_class, stream, 0.0, canonical_oracle(u))

        assert run.mistakes <= math.log2(threshold_class.n_hypotheses)

    def test_eta_range(self, threshold_class, identity_perturbation):
        with pytest.raises(ValueError):
            wm.wm_finite(threshold_class, [], 1.0, canonical_oracle(identity_perturbation))


class TestExpertWM:
    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_grouped_and_materialized_modes_agree(self, seed):
        _, hypotheses = make_threshold_class(4)
        u = neighbor_perturbation(4, 1)
        stream = noisy_stream(4, 8, seed)
        oracle = canonical_oracle(u)
        family = wm.expert_family_size(littlestone_dimension(hypotheses), len(stream))
        eta = wm.default_eta(family, len(stream))

        grouped = wm.wm_experts(hypotheses, stream, oracle, eta=eta, mode=ExpertMode.GROUPED)
        materialized = wm.wm_experts(hypotheses, stream, oracle, eta=eta, mode=ExpertMode.MATERIALIZED)

        assert grouped.mistake_rounds == materialized.mistake_rounds
        assert all(a.same_labels(b) for a, b in zip(grouped.predictors, materialized.predictors))
        assert grouped.state.log_total == pytest.approx(materialized.state.log_total)

    @pytest.mark.parametrize("seed", [8, 9, 10, 11])
    def test_expert_mistakes_within_raw_bound(self, seed):
        _, hypotheses = make_threshold_class(8)
        u = neighbor_perturbation(8, 1)
        stream = noisy_stream(8, 16, seed)
        lit = littlestone_dimension(hypotheses)
        family = wm.expert_family_size(lit, len(stream))
        eta = wm.default_eta(family, len(stream))

        run = wm.wm_experts(hypotheses, stream, canonical_oracle(u), eta=eta)

        opt, _ = wm.stream_opt(hypotheses, stream, u)
        assert run.family_size == family
        assert run.mistakes <= wm.finite_wm_bound(eta, opt, family) + TOLERANCE
        assert all(r <= (1 + eta) / 2 * (1 + TOLERANCE) for r in run.contraction_ratios)

    def test_group_cap(self):
        _, hypotheses = make_threshold_class(8)
        stream = noisy_stream(8, 12, 3)
        with pytest.raises(wm.ExpertFamilyTooLarge):
            wm.wm_experts(hypotheses, stream, canonical_oracle(neighbor_perturbation(8, 0)), group_cap=0)

    def test_horizon_overflow(self, threshold_class, identity_perturbation):
        stream = [LabeledExample(0, -1)] * 3
        with pytest.raises(wm.ExpertFamilyTooLarge):
            wm.wm_experts(threshold_class, stream, canonical_oracle(identity_perturbation), horizon=1)


class TestOnlineToBatch:
    def test_mixture_risk_is_mean_of_prefix_risks(self, threshold_scenario):
        result = wm.online_to_batch(
            threshold_scenario.hypotheses, threshold_scenario.distribution, threshold_scenario.u,
            canonical_oracle(threshold_scenario.u), 12, seed=4,
        )
        risks = [robust_risk(p, threshold_scenario.distribution, threshold_scenario.u) for p in result.predictors]
        assert len(result.predictors) == 12
        assert result.risk == pytest.approx(sum(risks) / 12)
        assert 0.0 <= result.risk <= 1.0

    def test_same_seed_same_mixture(self, threshold_scenario):
        args = (
            threshold_scenario.hypotheses, threshold_scenario.distribution, threshold_scenario.u,
            canonical_oracle(threshold_scenario.u), 10,
        )
        assert wm.online_to_batch(*args, seed=2).risk == wm.online_to_batch(*args, seed=2).risk

    def test_needs_one_example(self, threshold_scenario):
        with pytest.raises(ValueError):
            wm.online_to_batch(
                threshold_scenario.hypotheses, threshold_scenario.distribution, threshold_scenario.u,
                canonical_oracle(threshold_scenario.u), 0, seed=0,
            )

    def test_sample_sizes(self):
        m = wm.agnostic_sample_size(1, 0.5, 0.1)
        family = math.log(wm.expert_family_size(1, m))
        assert 4 * math.sqrt(family / m) + 2 * math.sqrt(2 * math.log(10) / m) <= 0.5
        assert wm.finite_sample_size(1, 0.5, 0.5) == math.ceil((2 * math.sqrt(2 * math.log(2)) / 0.5) ** 2)
