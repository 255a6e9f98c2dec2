import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splicegan import sampler as S
from splicegan.errors import (
    DegenerateAttributeError,
    DegenerateBoundError,
    NoUsefulPairsError,
    SchedulerExhaustedError,
)

TABLE1 = S.LabelCensus.from_counts([1, 1, 100, 100])


class TestCensus:
    def test_canonical_binary_order(self):
        assert S.canonical_patterns(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_totals_and_lookup(self):
        assert TABLE1.m == 202
        assert TABLE1.count((1, 0)) == 100

    def test_from_labels(self):
        census = S.LabelCensus.from_labels([(0, 1), (1, 0), (1, 0)])
        assert census.counts == (0, 1, 2, 0)

    def test_bad_length_rejected(self):
        with pytest.raises(ValueError):
            S.LabelCensus.from_counts([1, 2, 3])


class TestBalancedness:
    def test_balanced_single_attribute(self):
        assert S.balancedness(S.LabelCensus.from_counts([5, 5]), 1) == 1.0

    def test_table_first_attribute(self):
        assert S.balancedness(TABLE1, 1) == 100.0

    def test_table_second_attribute(self):
        assert S.balancedness(TABLE1, 2) == 1.0

    def test_degenerate_attribute(self):
        with pytest.raises(DegenerateAttributeError):
            S.balancedness(S.LabelCensus.from_counts([0, 5]), 1)


class TestCriterion:
    def test_balanced_two_attributes_holds(self):
        value, holds = S.criterion_margin(S.LabelCensus.from_counts([1, 1, 1, 1]))
        assert value == 2.0 and holds

    def test_balanced_three_attributes_fails(self):
        value, holds = S.criterion_margin(S.LabelCensus.from_counts([1] * 8))
        assert value == 2.0 and not holds

    def test_table_census(self):
        value, holds = S.criterion_margin(TABLE1)
        assert value == 2.0 and holds
        assert S.criterion_value(100.0) == pytest.approx(51.005, abs=1e-9)

    def test_minimum_at_one_is_exactly_two(self):
        assert S.criterion_value(1.0) == 2.0


class TestCouponExpectation:
    def test_single_element(self):
        assert S.coupon_expectation(1, 1) == 1.0

    def test_six_of_six(self):
        assert S.coupon_expectation(6, 6) == pytest.approx(14.7, abs=1e-12)

    def test_ten_of_five(self):
        assert S.coupon_expectation(10, 5) == pytest.approx(137.0 / 6.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            S.coupon_expectation(5, 6)
        with pytest.raises(ValueError):
            S.coupon_expectation(5, 0)


class TestExpectedRandomPairs:
    def test_two_singleton_labels(self):
        assert S.expected_random_pairs(S.LabelCensus.from_counts([1, 1])) == 6.0

    def test_two_by_two(self):
        expected = 16.0 * S.harmonic(8)
        got = S.expected_random_pairs(S.LabelCensus.from_counts([2, 2]))
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(43.4857142857, abs=1e-9)

    def test_single_label_census(self):
        with pytest.raises(NoUsefulPairsError):
            S.expected_random_pairs(S.LabelCensus.from_counts([3, 0]))


class TestIterativeBound:
    def test_uniform_two_attribute_census(self):
        census = S.LabelCensus.from_counts([1, 1, 1, 1])
        bound = S.expected_iterative_bound(census)
        # per attribute: 2 * (carriers * non-carriers) * H_8 = 2*4*H_8;
        # the bound multiplies the worst attribute by n = 2
        assert bound == pytest.approx(2 * (2 * 4 * S.harmonic(8)), rel=1e-12)
        assert bound == pytest.approx(43.4857142857, abs=1e-9)

    def test_bound_below_random_expectation(self):
        census = S.LabelCensus.from_counts([1, 1, 1, 1])
        e1 = S.expected_random_pairs(census)
        assert e1 == pytest.approx(49.6513708514, abs=1e-9)
        assert S.expected_iterative_bound(census) <= e1

    def test_single_attribute_degenerates(self):
        with pytest.raises(DegenerateBoundError):
            S.expected_iterative_bound(S.LabelCensus.from_counts([2, 3]))

    def test_missing_complementary_labels_contribute_zero(self):
        # patterns (0,1,1) and (1,1,1) absent: their merged class is empty
        # and contributes nothing to the square sum, without erroring
        census = S.LabelCensus.from_counts([1, 1, 1, 0, 1, 1, 1, 0])
        bound = S.expected_iterative_bound(census)
        # maximizing attribute is s=1: carriers 3 x non-carriers 3, merged
        # square sum 2^2 * 3, harmonic length 36 - 12 = 24
        expected = 3 * (2 * 3.0 * 3.0 * S.harmonic(24))
        assert bound == pytest.approx(expected, rel=1e-12)

    def test_harmonic_smallest_first(self):
        assert S.harmonic(0) == 0.0
        assert S.harmonic(3) == pytest.approx(11.0 / 6.0, abs=1e-15)


class TestPairSources:
    def _state(self, counts, seed=5):
        census = S.LabelCensus.from_counts(counts)
        labels = census.expand_labels()
        gen = np.random.Generator(np.random.Philox(key=seed))
        return S.SamplerState.from_labels(labels, gen), np.asarray(labels)

    def test_cyclic_attribute_order(self):
        state, _ = self._state([1, 1, 1, 1])
        attrs = [S.next_pair(state).attribute for _ in range(4)]
        assert attrs == [1, 2, 1, 2]

    def test_pairs_are_oriented(self):
        state, labels = self._state([2, 3, 4, 1])
        for _ in range(40):
            p = S.next_pair(state)
            assert labels[p.index_a][p.attribute - 1] == 1
            assert labels[p.index_b][p.attribute - 1] == 0

    def test_usage_counts_balanced_over_cycles(self):
        state, _ = self._state([1, 1, 1, 1])
        counts = {1: 0, 2: 0}
        for _ in range(10 * 2):
            counts[S.next_pair(state).attribute] += 1
        assert counts == {1: 10, 2: 10}

    def test_rare_side_selection_probability(self):
        state, labels = self._state([1, 1, 100, 100], seed=11)
        rare = set(np.flatnonzero(labels[:, 0] == 0))
        hits = {i: 0 for i in rare}
        draws = 4000
        for _ in range(draws):
            _, pairs = S.next_pairs(state, 1)
            if pairs[0].attribute == 1:
                hits[pairs[0].index_b] += 1
        total = sum(hits.values())
        for i in rare:
            assert hits[i] / total == pytest.approx(0.5, abs=0.05)

    def test_degenerate_attribute_skipped_with_warning(self, caplog):
        state, _ = self._state([0, 2, 0, 3])  # every image carries attribute 2
        with caplog.at_level(logging.WARNING, logger="splicegan.sampler"):
            attrs = {S.next_pair(state).attribute for _ in range(6)}
        assert attrs == {1}
        assert any("attribute 2" in r.message for r in caplog.records)

    def test_scheduler_exhausted(self):
        state, _ = self._state([5, 0])
        with pytest.raises(SchedulerExhaustedError):
            S.next_pair(state)

    def test_random_pair_single_image_never_useful(self):
        gen = np.random.default_rng(0)
        labels = [(0,)]
        for _ in range(10):
            _, useful = S.random_pair(labels, gen)
            assert not useful

    def test_random_pair_usefulness_frequency(self):
        census = S.LabelCensus.from_counts([2, 2])
        labels = census.expand_labels()
        gen = np.random.Generator(np.random.Philox(key=3))
        hits = sum(S.random_pair(labels, gen)[1] for _ in range(20000))
        assert hits / 20000 == pytest.approx(0.5, abs=0.01)

    def test_orient_random_pair(self):
        labels = [(0, 1), (1, 0)]
        gen = np.random.default_rng(0)
        p = S.orient_random_pair(labels, 0, 1, gen)
        assert labels[p.index_a][p.attribute - 1] == 1
        with pytest.raises(NoUsefulPairsError):
            S.orient_random_pair([(1,), (1,)], 0, 1, gen)


class TestSimulation:
    def test_random_matches_closed_form_small(self):
        census = S.LabelCensus.from_counts([1, 1])
        mean, stderr = S.simulate_collection(census, "random", 4000, seed=7)
        assert abs(mean - 6.0) < 3 * stderr + 1e-9

    def test_iterative_below_bound(self):
        census = S.LabelCensus.from_counts([1, 1, 1, 1])
        mean, stderr = S.simulate_collection(census, "iterative", 3000, seed=7)
        assert mean + 3 * stderr < S.expected_iterative_bound(census)

    def test_deterministic_given_seed(self):
        census = S.LabelCensus.from_counts([2, 1])
        a = S.simulate_collection(census, "random", 500, seed=9)
        b = S.simulate_collection(census, "random", 500, seed=9)
        assert a == b

    def test_single_label_rejected(self):
        with pytest.raises(NoUsefulPairsError):
            S.simulate_collection(S.LabelCensus.from_counts([4, 0]), "random", 10)

    def test_iterative_requires_live_attribute(self):
        with pytest.raises(SchedulerExhaustedError):
            S.simulate_collection(S.LabelCensus.from_counts([4, 0]), "iterative", 10)

    def test_coupon_simulation_matches_lemma(self):
        mean, stderr = S.simulate_coupon(6, 6, 4000, seed=1)
        assert abs(mean - 14.7) < 3 * stderr + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=3), min_size=2, max_size=4))
    def test_random_simulation_consistency_small_censuses(self, counts):
        if len(counts) == 3:
            counts = counts + [0]
        census = S.LabelCensus.from_counts(counts)
        if census.m > 6 or S.useful_pair_count(census) == 0:
            return
        mean, stderr = S.simulate_collection(census, "random", 1500, seed=13)
        expected = S.expected_random_pairs(census)
        assert abs(mean - expected) < 4 * stderr + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e3))
def test_criterion_symmetry(rho):
    assert abs(S.criterion_value(rho) - S.criterion_value(1.0 / rho)) < 1e-12
    assert S.criterion_value(rho) >= 2.0


@settings(max_examples=100, deadline=None)
@given(st.tuples(*(st.integers(min_value=1, max_value=20) for _ in range(4))))
def test_iterative_bound_never_exceeds_random_expectation_n2(counts):
    census = S.LabelCensus.from_counts(counts)
    assert S.expected_iterative_bound(census) <= S.expected_random_pairs(census) + 1e-9
