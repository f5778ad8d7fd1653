"""
Tests for the finite universe: instances, classes, distributions, perturbation sets.
"""
import numpy as np
import pytest

from src.models import (
    FiniteDistribution,
    HypothesisClass,
    InstanceSpace,
    LabeledExample,
    OracleResponse,
    PerturbationSet,
    QueryLog,
    TableLookup,
)

pytestmark = pytest.mark.unit


class TestInstanceSpace:
    def test_empty_space_rejected(self):
        with pytest.raises(ValueError):
            InstanceSpace(0)

    def test_instances_are_dense_indices(self):
        assert list(InstanceSpace(3).instances()) == [0, 1, 2]


class TestLabeledExample:
    def test_label_must_be_plus_or_minus_one(self):
        with pytest.raises(ValueError):
            LabeledExample(0, 0)

    def test_negative_instance_rejected(self):
        with pytest.raises(ValueError):
            LabeledExample(-1, 1)

    def test_check_range(self):
        with pytest.raises(ValueError):
            LabeledExample(4, 1).check_range(4)
        LabeledExample(3, -1).check_range(4)

    def test_examples_are_hashable_values(self):
        assert LabeledExample(2, 1) == LabeledExample(2, 1)
        assert len({LabeledExample(2, 1), LabeledExample(2, 1), LabeledExample(2, -1)}) == 2


class TestHypothesisClass:
    def test_from_rows(self):
        hypotheses = HypothesisClass.from_rows(["+-+", "---"])
        assert hypotheses.n_hypotheses == 2
        assert hypotheses.n_instances == 3
        assert hypotheses.row_string(0) == "+-+"
        assert hypotheses.labels.dtype == np.int8

    def test_duplicate_rows_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            HypothesisClass.from_rows(["+-", "+-"])

    def test_invalid_characters_rejected(self):
        with pytest.raises(ValueError):
            HypothesisClass.from_rows(["+0"])

    def test_labels_are_read_only(self):
        hypotheses = HypothesisClass.from_rows(["+-"])
        with pytest.raises(ValueError):
            hypotheses.labels[0, 0] = -1

    def test_restrict_and_consistent_mask(self):
        hypotheses = HypothesisClass.from_rows(["++", "+-", "-+"])
        assert hypotheses.restrict(hypotheses.full_mask, 0, 1) == 0b011
        assert hypotheses.restrict(hypotheses.full_mask, 0, -1) == 0b100
        mask = hypotheses.consistent_mask([LabeledExample(0, 1), LabeledExample(1, -1)])
        assert hypotheses.rows_of(mask) == [1]
        assert hypotheses.mask_of([0, 2]) == 0b101


class TestFiniteDistribution:
    def test_from_weights_normalizes(self):
        examples = [LabeledExample(0, 1), LabeledExample(1, -1)]
        distribution = FiniteDistribution.from_weights(examples, [1.0, 3.0])
        assert distribution.probabilities.tolist() == pytest.approx([0.25, 0.75])
        assert distribution.probabilities.sum() == pytest.approx(1.0)

    def test_atoms_must_be_distinct(self):
        with pytest.raises(ValueError, match="distinct"):
            FiniteDistribution.uniform([LabeledExample(0, 1), LabeledExample(0, 1)])

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            FiniteDistribution(((LabeledExample(0, 1), 0.5),))


class TestPerturbationSet:
    def test_sets_are_sorted_and_deduplicated(self):
        u = PerturbationSet([[1, 0, 1], [1]])
        assert u[0] == (0, 1)
        assert u.contains(0, 1)
        assert not u.contains(1, 0)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            PerturbationSet([[0], []])

    def test_out_of_range_target_rejected(self):
        with pytest.raises(ValueError):
            PerturbationSet([[0], [2]])

    def test_self_membership_is_not_required(self):
        u = PerturbationSet([[1], [0]])
        assert not u.includes_self
        assert PerturbationSet.identity(3).includes_self

    def test_is_within(self):
        assert PerturbationSet.identity(3).is_within(PerturbationSet.full(3))
        assert not PerturbationSet.full(3).is_within(PerturbationSet.identity(3))


class TestQueryLog:
    def test_records_in_order_with_stage_counts(self):
        log = QueryLog()
        predictor = TableLookup.constant(2)
        log.record(predictor, LabeledExample(0, 1), OracleResponse.robustly_correct(), "a")
        log.record(predictor, LabeledExample(1, -1), OracleResponse.perturbation(1), "b")
        log.record(predictor, LabeledExample(1, -1), OracleResponse.perturbation(1), "b")
        assert log.total == 3
        assert [entry.stage for entry in log] == ["a", "b", "b"]
        assert log.counts_by_stage() == {"a": 1, "b": 2}
        assert log.entries[1].response.counterexample == 1
        assert log.entries[0].response.is_robust
