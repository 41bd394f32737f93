import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seivote.voting import (
    Decision,
    StoppingConfig,
    VoteTally,
    check_stop,
    decide_sequential,
    favored_certainty,
    preponderance_certainty,
    record_vote,
    reg_incomplete_beta,
)

from oracles import assert_rate_not_above, binomial_sum_beta_cdf


class TestRegIncompleteBeta:
    def test_uniform_distribution(self):
        assert reg_incomplete_beta(0.5, 1, 1) == pytest.approx(0.5, abs=1e-14)

    def test_worked_example_100_votes(self):
        # 60/40 split: certainty 97.7%
        assert reg_incomplete_beta(0.5, 61, 41) == pytest.approx(0.023, abs=5e-4)

    def test_worked_example_400_votes(self):
        assert reg_incomplete_beta(0.5, 241, 161) == pytest.approx(3.067e-5, abs=1e-7)

    def test_closed_form_b_equal_one(self):
        # I_x(a, 1) = x^a
        assert reg_incomplete_beta(0.5, 3, 1) == pytest.approx(0.125, abs=1e-13)
        assert reg_incomplete_beta(0.5, 3, 1) == pytest.approx(
            binomial_sum_beta_cdf(0.5, 3, 1), abs=1e-13
        )

    def test_endpoints(self):
        assert reg_incomplete_beta(0.0, 4.2, 7.7) == 0.0
        assert reg_incomplete_beta(1.0, 4.2, 7.7) == 1.0

    @pytest.mark.parametrize("x", [0.1, 0.5, 0.9])
    def test_integer_parameter_oracle(self, x):
        for a in range(1, 60):
            for b in range(1, 61 - a):
                expected = binomial_sum_beta_cdf(x, a, b)
                assert reg_incomplete_beta(x, a, b) == pytest.approx(
                    expected, abs=1e-10
                ), f"a={a}, b={b}, x={x}"

    def test_accuracy_at_large_parameters(self):
        # absolute error <= 1e-12 up to a, b = 1e4; reference from the
        # exact integer-parameter identity evaluated in float via scipy
        from scipy.special import betainc

        for a, b, x in [(10000, 10000, 0.499), (9999, 10000, 0.5), (10000, 3, 0.9995)]:
            assert reg_incomplete_beta(x, a, b) == pytest.approx(
                float(betainc(a, b, x)), abs=1e-12
            )

    @given(
        a=st.floats(min_value=0.5, max_value=500.0),
        b=st.floats(min_value=0.5, max_value=500.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry_identity(self, a, b):
        total = reg_incomplete_beta(0.5, a, b) + reg_incomplete_beta(0.5, b, a)
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize(
        "x,a,b",
        [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2), (0.5, math.inf, 1)],
    )
    def test_invalid_arguments(self, x, a, b):
        with pytest.raises(ValueError):
            reg_incomplete_beta(x, a, b)


class TestVoteTally:
    def test_record_vote(self):
        tally = VoteTally.empty(2)
        assert record_vote(tally, 0).counts == (1, 0)

    def test_total_increments_by_one(self):
        tally = VoteTally((3, 4))
        assert record_vote(tally, 1).total == tally.total + 1

    def test_value_semantics(self):
        tally = VoteTally.empty(2)
        record_vote(tally, 0)
        assert tally.counts == (0, 0)

    def test_sequential_votes(self):
        tally = VoteTally.empty(2)
        for _ in range(100):
            tally = record_vote(tally, 1)
        assert tally.counts == (0, 100)

    def test_invalid(self):
        with pytest.raises(ValueError):
            VoteTally((1,))
        with pytest.raises(ValueError):
            VoteTally((1, -1))
        with pytest.raises(ValueError):
            record_vote(VoteTally.empty(2), 2)


class TestPreponderanceCertainty:
    def test_worked_example(self):
        assert preponderance_certainty(VoteTally((60, 40)), 0) == pytest.approx(
            0.977, abs=5e-4
        )

    def test_no_evidence(self):
        assert preponderance_certainty(VoteTally((0, 0)), 0) == pytest.approx(0.5)

    @pytest.mark.parametrize("n", [1, 5, 10, 30])
    def test_unanimous_closed_form(self, n):
        # F(0.5; n+1, 1) = 0.5^(n+1)
        tally = VoteTally((n, 0))
        assert preponderance_certainty(tally, 0) == pytest.approx(
            1.0 - 0.5 ** (n + 1), abs=1e-12
        )

    def test_rivals_merged_by_counts(self):
        # three rivals with 2 votes each behave like one rival with 6
        tally = VoteTally((10, 2, 2, 2))
        merged = VoteTally((10, 6))
        assert preponderance_certainty(tally, 0) == pytest.approx(
            preponderance_certainty(merged, 0), abs=1e-14
        )

    def test_dirichlet_marginal_variant(self):
        # summing rival parameters adds N - 2 pseudo-counts to the rival side
        tally = VoteTally((10, 2, 2, 2))
        variant = preponderance_certainty(tally, 0, sum_rival_parameters=True)
        base = preponderance_certainty(tally, 0)
        equivalent = VoteTally((10, 8))  # 6 rival votes + (N-2)=2 extra
        assert variant == pytest.approx(
            preponderance_certainty(equivalent, 0), abs=1e-14
        )
        assert variant < base

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=200), min_size=2, max_size=5),
        category=st.integers(min_value=0, max_value=4),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_votes(self, counts, category):
        category = category % len(counts)
        tally = VoteTally(tuple(counts))
        before = [preponderance_certainty(tally, j) for j in range(len(counts))]
        after_tally = record_vote(tally, category)
        for j in range(len(counts)):
            after = preponderance_certainty(after_tally, j)
            if j == category:
                assert after >= before[j] - 1e-12
            else:
                assert after <= before[j] + 1e-12


class TestFavoredCertainty:
    def test_two_categories_equals_preponderance(self):
        tally = VoteTally((60, 40))
        assert favored_certainty(tally, 0) == pytest.approx(
            preponderance_certainty(tally, 0), abs=1e-14
        )
        assert favored_certainty(tally, 0) == pytest.approx(0.977, abs=5e-4)

    def test_no_evidence_three_categories(self):
        # two rivals at the prior each contribute error 0.5
        assert favored_certainty(VoteTally((0, 0, 0)), 0) == 0.0

    def test_unanimous_three_categories(self):
        # each pairwise error is F(0.5; 11, 1) = 0.5^11
        tally = VoteTally((10, 0, 0))
        assert favored_certainty(tally, 0) == pytest.approx(
            1.0 - 2.0 * 0.5**11, abs=1e-12
        )

    def test_agreement_with_preponderance_on_stop(self):
        rng = np.random.default_rng(123)
        config_p = StoppingConfig(acceptable_error=0.05, rule="preponderance")
        config_f = StoppingConfig(acceptable_error=0.05, rule="favored")
        agree = 0
        for _ in range(500):
            counts = tuple(int(c) for c in rng.integers(0, 40, size=4))
            if sum(counts) == 0:
                continue
            tally = VoteTally(counts)
            stop_p = check_stop(tally, config_p)
            stop_f = check_stop(tally, config_f)
            if stop_p is not None and stop_f is not None:
                assert stop_p[0] == stop_f[0]
                agree += 1
        assert agree > 0  # the property was actually exercised


class TestCheckStop:
    def test_unanimous_stop_boundary(self):
        config = StoppingConfig(acceptable_error=0.01)
        assert check_stop(VoteTally((5, 0)), config) is None  # 1 - 0.5^6 = 0.9844
        stop = check_stop(VoteTally((6, 0)), config)  # 1 - 0.5^7 = 0.99219
        assert stop is not None and stop[0] == 0
        assert stop[1] == pytest.approx(1.0 - 0.5**7, abs=1e-12)

    def test_worked_example_at_loose_threshold(self):
        stop = check_stop(VoteTally((60, 40)), StoppingConfig(acceptable_error=0.3))
        assert stop is not None
        assert stop[0] == 0 and stop[1] >= 0.7

    def test_empty_tally_never_stops(self):
        for e in (0.49, 0.1, 1e-6):
            assert check_stop(VoteTally((0, 0)), StoppingConfig(acceptable_error=e)) is None

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=60), min_size=2, max_size=5),
        error=st.sampled_from([0.3, 0.1, 0.01, 1e-4]),
        rule=st.sampled_from(["preponderance", "favored"]),
    )
    @settings(max_examples=300, deadline=None)
    def test_matches_exhaustive_evaluation(self, counts, error, rule):
        # reference: evaluate every category, not just the argmax counts
        tally = VoteTally(tuple(counts))
        config = StoppingConfig(acceptable_error=error, rule=rule)
        certainty_fn = (
            favored_certainty if rule == "favored" else preponderance_certainty
        )
        qualifying = [
            (i, certainty_fn(tally, i))
            for i in range(tally.num_categories)
            if certainty_fn(tally, i) >= 1.0 - error
        ]
        expected = max(qualifying, key=lambda t: (t[1], -t[0])) if qualifying else None
        got = check_stop(tally, config)
        if expected is None:
            assert got is None
        else:
            assert got is not None
            assert got[0] == expected[0]
            assert got[1] == pytest.approx(expected[1], abs=1e-14)


def _constant_votes(category):
    while True:
        yield category


class TestDecideSequential:
    def test_perfect_voter_stops_at_six_votes(self):
        decision = decide_sequential(
            _constant_votes(1), 3, StoppingConfig(acceptable_error=0.01)
        )
        assert decision.conclusive
        assert decision.winner == 1
        assert decision.votes_used == 6

    def test_perfect_voter_stops_at_nine_votes(self):
        decision = decide_sequential(
            _constant_votes(0), 2, StoppingConfig(acceptable_error=1e-3)
        )
        assert decision.votes_used == 9

    def test_max_votes_reached_is_inconclusive(self):
        def alternating():
            while True:
                yield 0
                yield 1

        decision = decide_sequential(
            alternating(), 2, StoppingConfig(acceptable_error=0.01, max_votes=50)
        )
        assert not decision.conclusive
        assert not decision.exhausted
        assert decision.votes_used == 50
        assert decision.winner == 0  # tie broken toward the lower index

    def test_exhausted_source_flagged(self):
        decision = decide_sequential(
            iter([0, 0, 0]), 2, StoppingConfig(acceptable_error=1e-6)
        )
        assert not decision.conclusive
        assert decision.exhausted
        assert decision.votes_used == 3

    def test_coin_flip_voter_rarely_concludes(self):
        # p = 0.5 exactly, tight threshold, short budget
        config = StoppingConfig(acceptable_error=1e-6, max_votes=200)
        conclusive = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)

            def votes():
                while True:
                    yield int(rng.integers(0, 2))

            if decide_sequential(votes(), 2, config).conclusive:
                conclusive += 1
        assert conclusive / 100 < 0.15

    def test_majority_voter_always_concludes(self):
        # p = 0.6 > 0.5: stops almost surely within the budget
        config = StoppingConfig(acceptable_error=0.05, max_votes=10000)
        for seed in range(1000):
            rng = np.random.default_rng(1000 + seed)

            def votes():
                while True:
                    yield int(rng.random() >= 0.6)

            decision = decide_sequential(votes(), 2, config)
            assert decision.conclusive, f"seed {seed} inconclusive"

    def test_calibration_binary_voter(self):
        # wrong-winner rate stays below the threshold (one-sided binomial
        # test at significance 1e-3); inconclusive outcomes count as wrong
        threshold = 0.05
        config = StoppingConfig(acceptable_error=threshold, max_votes=10000)
        wrong = 0
        trials = 10000
        rng = np.random.default_rng(2024)
        for _ in range(trials):
            def votes():
                while True:
                    yield int(rng.random() >= 0.6)

            decision = decide_sequential(votes(), 2, config)
            if not decision.conclusive or decision.winner != 0:
                wrong += 1
        assert_rate_not_above(wrong, trials, threshold)

    def test_confusion_voter_sixteen_classes_no_wrong_winner(self):
        from seivote.classifier import ConfusionVoter

        voter = ConfusionVoter.symmetric(16, 0.82, rng_seed=99)
        config = StoppingConfig(acceptable_error=1e-3)
        wrong = 0
        for trial in range(1000):
            true = trial % 16
            decision = decide_sequential(voter.stream(true, "cal", trial), 16, config)
            assert decision.conclusive
            if decision.winner != true:
                wrong += 1
        assert wrong <= 1

    def test_invalid_vote_rejected(self):
        with pytest.raises(ValueError):
            decide_sequential(iter([5]), 2, StoppingConfig(acceptable_error=0.1))


class TestStoppingConfig:
    @pytest.mark.parametrize("error", [0.0, 0.5, 0.7, -0.1])
    def test_acceptable_error_range(self, error):
        with pytest.raises(ValueError):
            StoppingConfig(acceptable_error=error)

    def test_decision_invariant(self):
        decision = decide_sequential(
            _constant_votes(0), 2, StoppingConfig(acceptable_error=0.01)
        )
        assert decision.achieved_certainty >= 1.0 - 0.01
