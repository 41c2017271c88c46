"""Pairwise preference studies and their statistics.

A study shows respondents pairs of images: one candidate (the system
output under test) against one comparator (its baseline).  Trial
construction balances screen sides — candidate-left and candidate-right
counts differ by at most one — so position bias cannot masquerade as
preference.  Responses reduce to per-trial preference proportions and
an exact one-sided binomial test of the pooled choices against
p0 = 1/2, summed in log space (no normal approximation) so it stays
accurate at any n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import mean_and_stderr

CONDITIONS = (
    "local_search_vs_original",
    "automatic_vs_random",
    "collaborative_vs_random",
)

SIDES = ("left", "right")


@dataclass(frozen=True)
class Trial:
    """One pairwise comparison: a candidate image vs a comparator image."""

    trial_id: str
    condition: str
    left_image_id: str
    right_image_id: str
    candidate_side: str

    def __post_init__(self):
        if self.candidate_side not in SIDES:
            raise ValueError(f"candidate_side must be one of {SIDES}")
        if self.left_image_id == self.right_image_id:
            raise ValueError("a trial needs two distinct images")

    @property
    def candidate_image_id(self) -> str:
        return (self.left_image_id if self.candidate_side == "left"
                else self.right_image_id)


@dataclass(frozen=True)
class Response:
    """One respondent's pick for one trial."""

    respondent_id: str
    trial_id: str
    choice: str

    def __post_init__(self):
        if self.choice not in SIDES:
            raise ValueError(f"choice must be one of {SIDES}")
        if not self.respondent_id:
            raise ValueError("respondent_id must be non-empty")


def build_trials(condition: str, candidate_ids, comparator_ids,
                 rng: np.random.Generator) -> list:
    """Pair every candidate with a comparator, balancing screen sides.

    Comparators are assigned by a random permutation; candidate sides
    alternate from a randomly drawn first side, so the left/right
    counts differ by at most one.  The id lists must be equal length
    and contain no duplicates.
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    candidate_ids = list(candidate_ids)
    comparator_ids = list(comparator_ids)
    if len(candidate_ids) != len(comparator_ids):
        raise ValueError(
            f"need equally many candidates ({len(candidate_ids)}) and "
            f"comparators ({len(comparator_ids)})"
        )
    if not candidate_ids:
        raise ValueError("no trials to build")
    all_ids = candidate_ids + comparator_ids
    if len(set(all_ids)) != len(all_ids):
        raise ValueError("candidate/comparator ids must all be distinct")
    assignment = rng.permutation(len(comparator_ids))
    first = "left" if rng.random() < 0.5 else "right"
    trials = []
    for k, cand in enumerate(candidate_ids):
        comp = comparator_ids[assignment[k]]
        side = first if k % 2 == 0 else ("right" if first == "left" else "left")
        left, right = (cand, comp) if side == "left" else (comp, cand)
        trials.append(Trial(
            trial_id=f"t-{k:03d}",
            condition=condition,
            left_image_id=left,
            right_image_id=right,
            candidate_side=side,
        ))
    return trials


def count_candidate_choices(trials, responses) -> tuple:
    """(candidate chosen, total) across responses; unknown trial ids and
    duplicate (respondent, trial) pairs are refused."""
    by_id = {t.trial_id: t for t in trials}
    seen = set()
    chosen = 0
    total = 0
    for resp in responses:
        trial = by_id.get(resp.trial_id)
        if trial is None:
            raise ValueError(f"response for unknown trial {resp.trial_id!r}")
        key = (resp.respondent_id, resp.trial_id)
        if key in seen:
            raise ValueError(
                f"duplicate response from {resp.respondent_id!r} for trial "
                f"{resp.trial_id!r}"
            )
        seen.add(key)
        total += 1
        if resp.choice == trial.candidate_side:
            chosen += 1
    return chosen, total


@dataclass(frozen=True)
class PreferenceProportions:
    """Per-trial candidate-preference fractions and their spread."""

    per_trial: dict  # trial_id -> fraction choosing the candidate
    mean: float
    stderr: float


def preference_proportions(trials, responses) -> PreferenceProportions:
    """Fraction choosing the candidate per trial, plus mean +- stderr
    across the trials that received responses."""
    by_id = {t.trial_id: t for t in trials}
    seen = set()
    counts = {t.trial_id: [0, 0] for t in trials}  # [chosen, total]
    for resp in responses:
        trial = by_id.get(resp.trial_id)
        if trial is None:
            raise ValueError(f"response for unknown trial {resp.trial_id!r}")
        key = (resp.respondent_id, resp.trial_id)
        if key in seen:
            raise ValueError(
                f"duplicate response from {resp.respondent_id!r} for trial "
                f"{resp.trial_id!r}"
            )
        seen.add(key)
        counts[resp.trial_id][1] += 1
        if resp.choice == trial.candidate_side:
            counts[resp.trial_id][0] += 1
    per_trial = {
        trial_id: chosen / total
        for trial_id, (chosen, total) in counts.items() if total > 0
    }
    if not per_trial:
        raise ValueError("no responses to summarize")
    mean, stderr = mean_and_stderr(per_trial.values())
    return PreferenceProportions(per_trial=per_trial, mean=mean, stderr=stderr)


def exact_binomial_test(successes: int, n: int, p0: float = 0.5) -> float:
    """Exact one-sided binomial tail P(X >= successes | n, p0).

    Point masses are summed in log space via lgamma, so the result is
    accurate for any n without a normal approximation.
    """
    if n < 0 or successes < 0:
        raise ValueError("successes and n must be non-negative")
    if successes > n:
        raise ValueError(f"successes={successes} exceeds n={n}")
    if not (0.0 < p0 < 1.0):
        raise ValueError("p0 must lie strictly between 0 and 1")
    if successes == 0:
        return 1.0
    log_p = math.log(p0)
    log_q = math.log1p(-p0)
    log_n_fact = math.lgamma(n + 1)
    terms = [
        log_n_fact - math.lgamma(i + 1) - math.lgamma(n - i + 1)
        + i * log_p + (n - i) * log_q
        for i in range(successes, n + 1)
    ]
    peak = max(terms)
    total = peak + math.log(sum(math.exp(t - peak) for t in terms))
    return min(1.0, math.exp(total))


@dataclass(frozen=True)
class PreferenceSummary:
    """Everything a study report needs: pooled counts, exact binomial
    p-value, and the across-trial proportion statistics."""

    condition: str
    responses: int
    candidate_chosen: int
    proportion: float  # pooled fraction over all responses
    p_value: float
    mean: float  # mean of per-trial proportions
    stderr: float


def summarize_preferences(trials, responses,
                          condition: str | None = None) -> PreferenceSummary:
    trials = list(trials)
    if condition is None:
        conditions = {t.condition for t in trials}
        if len(conditions) != 1:
            raise ValueError(f"trials span multiple conditions: {conditions}")
        condition = conditions.pop()
    chosen, total = count_candidate_choices(trials, responses)
    if total == 0:
        raise ValueError("no responses to summarize")
    proportions = preference_proportions(trials, responses)
    return PreferenceSummary(
        condition=condition,
        responses=total,
        candidate_chosen=chosen,
        proportion=chosen / total,
        p_value=exact_binomial_test(chosen, total, 0.5),
        mean=proportions.mean,
        stderr=proportions.stderr,
    )


def write_trials_csv(trials, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trial_id", "condition", "left_image_id", "right_image_id",
             "candidate_side"]
        )
        for t in trials:
            writer.writerow([
                t.trial_id, t.condition, t.left_image_id, t.right_image_id,
                t.candidate_side,
            ])


def read_trials_csv(path: str) -> list:
    with open(path, newline="") as fh:
        return [
            Trial(
                trial_id=row["trial_id"],
                condition=row["condition"],
                left_image_id=row["left_image_id"],
                right_image_id=row["right_image_id"],
                candidate_side=row["candidate_side"],
            )
            for row in csv.DictReader(fh)
        ]


def read_responses_csv(path: str) -> list:
    with open(path, newline="") as fh:
        return [
            Response(
                respondent_id=row["respondent_id"],
                trial_id=row["trial_id"],
                choice=row["choice"],
            )
            for row in csv.DictReader(fh)
        ]


def write_responses_csv(responses, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_id", "respondent_id", "choice"])
        for r in responses:
            writer.writerow([r.trial_id, r.respondent_id, r.choice])


def write_proportions_csv(proportions: PreferenceProportions,
                          path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_id", "proportion"])
        for trial_id in sorted(proportions.per_trial):
            writer.writerow([trial_id, repr(proportions.per_trial[trial_id])])
