import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentart import (
    PreferenceProportions,
    Response,
    Trial,
    build_trials,
    count_candidate_choices,
    exact_binomial_test,
    make_rng,
    preference_proportions,
    read_responses_csv,
    read_trials_csv,
    summarize_preferences,
    write_proportions_csv,
    write_responses_csv,
    write_trials_csv,
)

# frozen from two independent high-precision routes (60-digit decimal
# arithmetic and exact rationals), which agree to the last digit shown
TAIL_185_OF_310 = 0.0003892740747778734


def fraction_tail(successes: int, n: int, p0: Fraction) -> Fraction:
    return sum(
        Fraction(math.comb(n, i)) * p0**i * (1 - p0)**(n - i)
        for i in range(successes, n + 1)
    )


class TestExactBinomialTest:
    def test_zero_successes_is_certain(self):
        assert exact_binomial_test(0, 10) == 1.0
        assert exact_binomial_test(0, 0) == 1.0

    def test_all_successes_fair_coin(self):
        assert exact_binomial_test(10, 10) == pytest.approx(2**-10, abs=1e-15)

    def test_pinned_study_sized_value(self):
        p = exact_binomial_test(185, 310, 0.5)
        assert p == pytest.approx(TAIL_185_OF_310, abs=1e-9)
        assert p < 0.001

    def test_matches_exact_rationals_everywhere_small(self):
        """Agreement with exact rational arithmetic for every k <= n <= 30
        and p0 in {1/4, 1/2, 3/4}."""
        for p0 in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
            for n in range(31):
                for k in range(n + 1):
                    got = exact_binomial_test(k, n, float(p0))
                    want = float(fraction_tail(k, n, p0))
                    assert abs(got - want) <= 1e-12, (k, n, p0)

    def test_monotone_decreasing_in_successes(self):
        previous = 1.0
        for k in range(0, 201):
            tail = exact_binomial_test(k, 200, 0.5)
            assert tail <= previous + 1e-15
            previous = tail

    def test_point_masses_recovered_from_tails(self):
        """tail(k) - tail(k+1) re-derives each point mass; they are
        non-negative and sum to one."""
        n = 40
        masses = [
            exact_binomial_test(k, n) - (
                exact_binomial_test(k + 1, n) if k < n else 0.0
            )
            for k in range(n + 1)
        ]
        assert all(m >= -1e-15 for m in masses)
        assert sum(masses) == pytest.approx(1.0, abs=1e-12)

    def test_large_n_against_decimal_oracle(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 50
        n = 1000
        for k in (400, 500, 520, 600, 990):
            want = float(mpmath.nsum(
                lambda i: mpmath.binomial(n, int(i)) * mpmath.mpf(0.5)**n,
                [k, n],
            ))
            assert exact_binomial_test(k, n) == pytest.approx(want, rel=1e-10)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            exact_binomial_test(5, 4)
        with pytest.raises(ValueError):
            exact_binomial_test(-1, 4)
        with pytest.raises(ValueError):
            exact_binomial_test(1, 4, 0.0)
        with pytest.raises(ValueError):
            exact_binomial_test(1, 4, 1.0)


def ids(prefix, n):
    return [f"{prefix}{k}" for k in range(n)]


class TestBuildTrials:
    def test_sides_balance_even_count(self):
        trials = build_trials("automatic_vs_random", ids("c", 10),
                              ids("r", 10), make_rng(1))
        sides = [t.candidate_side for t in trials]
        assert sides.count("left") == 5
        assert sides.count("right") == 5

    def test_sides_alternate(self):
        trials = build_trials("automatic_vs_random", ids("c", 6),
                              ids("r", 6), make_rng(2))
        sides = [t.candidate_side for t in trials]
        for a, b in zip(sides, sides[1:]):
            assert a != b

    def test_odd_count_differs_by_at_most_one(self):
        for seed in range(20):
            trials = build_trials("collaborative_vs_random", ids("c", 7),
                                  ids("r", 7), make_rng(seed))
            sides = [t.candidate_side for t in trials]
            assert abs(sides.count("left") - sides.count("right")) == 1

    def test_first_side_is_random(self):
        firsts = {
            build_trials("automatic_vs_random", ids("c", 2), ids("r", 2),
                         make_rng(seed))[0].candidate_side
            for seed in range(50)
        }
        assert firsts == {"left", "right"}

    def test_every_comparator_used_once(self):
        trials = build_trials("automatic_vs_random", ids("c", 12),
                              ids("r", 12), make_rng(3))
        comparators = {
            t.right_image_id if t.candidate_side == "left" else t.left_image_id
            for t in trials
        }
        assert comparators == set(ids("r", 12))

    def test_candidates_keep_their_order(self):
        trials = build_trials("automatic_vs_random", ids("c", 5),
                              ids("r", 5), make_rng(4))
        assert [t.candidate_image_id for t in trials] == ids("c", 5)

    def test_trial_ids_are_stable(self):
        trials = build_trials("automatic_vs_random", ids("c", 3),
                              ids("r", 3), make_rng(5))
        assert [t.trial_id for t in trials] == ["t-000", "t-001", "t-002"]

    def test_unknown_condition_rejected(self):
        with pytest.raises(ValueError):
            build_trials("mystery", ids("c", 2), ids("r", 2), make_rng(0))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            build_trials("automatic_vs_random", ids("c", 3), ids("r", 2),
                         make_rng(0))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            build_trials("automatic_vs_random", ["a", "b"], ["b", "c"],
                         make_rng(0))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_trials("automatic_vs_random", [], [], make_rng(0))

    @given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_balance_property(self, n, seed):
        trials = build_trials("automatic_vs_random", ids("c", n),
                              ids("r", n), make_rng(seed))
        sides = [t.candidate_side for t in trials]
        assert abs(sides.count("left") - sides.count("right")) <= 1


def respond(trial, chooser, pick_candidate):
    side = (trial.candidate_side if pick_candidate
            else ("left" if trial.candidate_side == "right" else "right"))
    return Response(respondent_id=chooser, trial_id=trial.trial_id,
                    choice=side)


class TestCounting:
    def test_counts_candidate_choices(self):
        trials = build_trials("automatic_vs_random", ids("c", 2),
                              ids("r", 2), make_rng(7))
        responses = [
            respond(trials[0], "p0", True),
            respond(trials[0], "p1", False),
            respond(trials[1], "p0", True),
        ]
        assert count_candidate_choices(trials, responses) == (2, 3)

    def test_unknown_trial_rejected(self):
        trials = build_trials("automatic_vs_random", ids("c", 1),
                              ids("r", 1), make_rng(7))
        bad = Response(respondent_id="p", trial_id="t-999", choice="left")
        with pytest.raises(ValueError, match="t-999"):
            count_candidate_choices(trials, [bad])

    def test_duplicate_response_rejected(self):
        trials = build_trials("automatic_vs_random", ids("c", 1),
                              ids("r", 1), make_rng(7))
        twice = [respond(trials[0], "p", True), respond(trials[0], "p", False)]
        with pytest.raises(ValueError, match="duplicate"):
            count_candidate_choices(trials, twice)


class TestPreferenceProportions:
    def test_single_trial_fraction(self):
        """24 of 31 respondents choosing the candidate: 24/31."""
        trials = build_trials("automatic_vs_random", ids("c", 1),
                              ids("r", 1), make_rng(9))
        responses = [
            respond(trials[0], f"p{k}", k < 24) for k in range(31)
        ]
        result = preference_proportions(trials, responses)
        assert result.per_trial["t-000"] == pytest.approx(24 / 31, abs=1e-15)
        assert result.mean == pytest.approx(24 / 31, abs=1e-15)
        assert result.stderr == 0.0  # single trial

    def test_mean_across_trials(self):
        trials = build_trials("automatic_vs_random", ids("c", 2),
                              ids("r", 2), make_rng(9))
        responses = []
        # trial 0: 1 of 10 pick the candidate; trial 1: 9 of 10
        responses += [respond(trials[0], f"a{k}", k < 1) for k in range(10)]
        responses += [respond(trials[1], f"b{k}", k < 9) for k in range(10)]
        result = preference_proportions(trials, responses)
        assert result.per_trial["t-000"] == pytest.approx(0.1)
        assert result.per_trial["t-001"] == pytest.approx(0.9)
        assert result.mean == pytest.approx(0.5)
        # sample sd of {0.1, 0.9} is 0.4*sqrt(2); stderr over 2 trials
        assert result.stderr == pytest.approx(0.4, abs=1e-12)

    def test_trials_without_responses_omitted(self):
        trials = build_trials("automatic_vs_random", ids("c", 3),
                              ids("r", 3), make_rng(9))
        responses = [respond(trials[0], "p", True)]
        result = preference_proportions(trials, responses)
        assert set(result.per_trial) == {"t-000"}

    def test_unanimous_candidate(self):
        trials = build_trials("automatic_vs_random", ids("c", 4),
                              ids("r", 4), make_rng(9))
        responses = [
            respond(t, f"p{k}", True) for t in trials for k in range(3)
        ]
        result = preference_proportions(trials, responses)
        assert result.mean == 1.0
        assert result.stderr == 0.0

    def test_no_responses_rejected(self):
        trials = build_trials("automatic_vs_random", ids("c", 1),
                              ids("r", 1), make_rng(9))
        with pytest.raises(ValueError):
            preference_proportions(trials, [])


class TestSummarize:
    def test_full_summary(self):
        trials = build_trials("collaborative_vs_random", ids("c", 2),
                              ids("r", 2), make_rng(13))
        responses = [
            respond(t, f"p{k}", k != 0) for t in trials for k in range(4)
        ]
        summary = summarize_preferences(trials, responses)
        assert summary.condition == "collaborative_vs_random"
        assert summary.responses == 8
        assert summary.candidate_chosen == 6
        assert summary.proportion == pytest.approx(0.75)
        assert summary.p_value == pytest.approx(
            float(fraction_tail(6, 8, Fraction(1, 2))), abs=1e-12
        )
        assert summary.mean == pytest.approx(0.75)

    def test_mixed_conditions_rejected(self):
        a = build_trials("automatic_vs_random", ids("c", 1), ids("r", 1),
                         make_rng(1))
        b = build_trials("collaborative_vs_random", ids("x", 1), ids("y", 1),
                         make_rng(1))
        b = [Trial(trial_id="t-100", condition=b[0].condition,
                   left_image_id=b[0].left_image_id,
                   right_image_id=b[0].right_image_id,
                   candidate_side=b[0].candidate_side)]
        with pytest.raises(ValueError, match="conditions"):
            summarize_preferences(a + b, [respond(a[0], "p", True)])


class TestCsvRoundTrips:
    def test_trials_round_trip(self, tmp_path):
        trials = build_trials("automatic_vs_random", ids("c", 5),
                              ids("r", 5), make_rng(17))
        path = tmp_path / "trials.csv"
        write_trials_csv(trials, path)
        assert read_trials_csv(path) == trials

    def test_responses_round_trip(self, tmp_path):
        trials = build_trials("automatic_vs_random", ids("c", 2),
                              ids("r", 2), make_rng(17))
        responses = [respond(trials[k], f"p{k}", True) for k in range(2)]
        path = tmp_path / "responses.csv"
        write_responses_csv(responses, path)
        assert read_responses_csv(path) == responses

    def test_responses_header_layout(self, tmp_path):
        trials = build_trials("automatic_vs_random", ids("c", 1),
                              ids("r", 1), make_rng(17))
        path = tmp_path / "responses.csv"
        write_responses_csv([respond(trials[0], "p0", True)], path)
        assert path.read_text().splitlines()[0] == (
            "trial_id,respondent_id,choice"
        )

    def test_proportions_layout_and_precision(self, tmp_path):
        proportions = PreferenceProportions(
            per_trial={"t-001": 2 / 3, "t-000": 0.25},
            mean=(2 / 3 + 0.25) / 2,
            stderr=0.1,
        )
        path = tmp_path / "proportions.csv"
        write_proportions_csv(proportions, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "trial_id,proportion"
        assert lines[1].startswith("t-000,")  # sorted by trial id
        assert float(lines[2].split(",")[1]) == 2 / 3  # repr round-trips
