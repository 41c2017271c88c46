"""Pairwise preference protocol on simulated respondents.

Builds side-balanced trials pitting evolved images against random ones,
collects two-alternative forced choices from simulated respondents with
a mild real preference, and runs the one-sided exact binomial test.
"""
from latentart import (
    Response,
    build_trials,
    exact_binomial_test,
    make_rng,
    preference_proportions,
    summarize_preferences,
)


def main():
    rng = make_rng(31)
    candidates = [f"evolved-{k}" for k in range(10)]
    comparators = [f"random-{k}" for k in range(10)]
    trials = build_trials("collaborative_vs_random", candidates, comparators,
                          rng)
    sides = [t.candidate_side for t in trials]
    print(f"{len(trials)} trials, candidate shown left in "
          f"{sides.count('left')} and right in {sides.count('right')}")

    # 31 respondents who genuinely prefer the candidate 60% of the time
    responses = []
    for r in range(31):
        for t in trials:
            pick = t.candidate_side if rng.random() < 0.6 else (
                "left" if t.candidate_side == "right" else "right")
            responses.append(Response(
                respondent_id=f"r{r:02d}", trial_id=t.trial_id, choice=pick))

    summary = summarize_preferences(trials, responses)
    print(f"candidate chosen in {summary.candidate_chosen} of "
          f"{summary.responses} choices ({summary.proportion:.1%})")
    print(f"one-sided exact binomial p-value: {summary.p_value:.3g}")

    proportions = preference_proportions(trials, responses)
    print(f"per-trial proportion: mean {proportions.mean:.3f}, "
          f"stderr {proportions.stderr:.3f}")

    # the same tail probability at the null, for contrast
    null = exact_binomial_test(summary.responses // 2,
                               summary.responses, 0.5)
    print(f"for reference, an exactly even split would give p = {null:.3g}")


if __name__ == "__main__":
    main()
