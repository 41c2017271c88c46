"""Image scoring: automatic scorers and human rating aggregation.

Every scorer maps an image to a single float in [1, 10].

* ``SyntheticScorer`` — closed-form stand-in for a learned aesthetic
  model: 1 + 9 * (1 - mean|pixel - target| / 2) against a fixed target
  pattern (default: vertical ramp from -1 in the top row to +1 in the
  bottom row, equal across channels).  Deterministic, needs no weights.
* ``ScorerModel`` — a TorchScript graph producing a 10-bucket score
  distribution; the scalar score is the distribution mean over buckets
  1..10.  Preprocessing (input size, value range) comes from a sidecar
  manifest so the package never guesses.

Human ratings arrive as ballots (one per participant per generation)
and are reduced to per-image fitness records by ``aggregate_ratings``.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import AggregationError, BackendError, validate_fitness
from .generator import BASE_HEIGHT, BASE_WIDTH, ImageBuffer

SCORE_BUCKETS = 10
DISTRIBUTION_TOLERANCE = 1e-3


def default_target(height: int = BASE_HEIGHT, width: int = BASE_WIDTH) -> np.ndarray:
    """Ramp from -1 (top row) to +1 (bottom row), equal across channels."""
    rows = np.linspace(-1.0, 1.0, height)
    return np.broadcast_to(rows[:, None, None], (height, width, 3)).copy()


class SyntheticScorer:
    """Scores closeness to a target pattern on the [1, 10] scale."""

    def __init__(self, target: np.ndarray | None = None):
        self.target = default_target() if target is None else np.asarray(
            target, dtype=np.float64
        )

    def __call__(self, img: ImageBuffer) -> float:
        if img.pixels.shape != self.target.shape:
            raise ValueError(
                f"image shape {img.pixels.shape} does not match target "
                f"{self.target.shape}"
            )
        goodness = 1.0 - float(np.abs(img.pixels - self.target).mean()) / 2.0
        return 1.0 + 9.0 * goodness


def synthetic_score(img: ImageBuffer) -> float:
    return SyntheticScorer()(img)


class ScorerModel:
    """TorchScript score-distribution model plus its preprocessing manifest.

    The manifest is JSON next to the model file (same path + ``.json``)
    with fields ``input_height``, ``input_width`` and ``value_range``
    ([lo, hi] the pixel values are mapped to).
    """

    def __init__(self, path: str, manifest_path: str | None = None):
        self.path = path
        manifest_path = manifest_path or path + ".json"
        try:
            with open(manifest_path) as fh:
                manifest = json.load(fh)
        except FileNotFoundError:
            raise BackendError(f"scorer manifest not found: {manifest_path}")
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed scorer manifest: {exc}")
        try:
            self.input_height = int(manifest["input_height"])
            self.input_width = int(manifest["input_width"])
            lo, hi = manifest["value_range"]
            self.value_range = (float(lo), float(hi))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"incomplete scorer manifest: {exc}")
        self._model = None
        self._lock = threading.Lock()

    def _load(self):
        if self._model is None:
            try:
                import torch
            except ImportError:
                raise BackendError(
                    "model scorer requires torch; install the 'model' extra"
                )
            try:
                self._model = torch.jit.load(self.path, map_location="cpu")
                self._model.eval()
            except (OSError, RuntimeError, ValueError) as exc:
                raise BackendError(f"cannot load scorer model {self.path}: {exc}")
        return self._model

    def distribution(self, img: ImageBuffer) -> np.ndarray:
        import torch

        model = self._load()
        px = img.pixels
        if (img.height, img.width) != (self.input_height, self.input_width):
            px = _resize_nearest(px, self.input_height, self.input_width)
        lo, hi = self.value_range
        px = lo + (px + 1.0) / 2.0 * (hi - lo)
        batch = torch.as_tensor(
            px.transpose(2, 0, 1)[None].copy(), dtype=torch.float32
        )
        with self._lock, torch.no_grad():
            try:
                out = model(batch)
            except RuntimeError as exc:
                raise BackendError(f"scorer model failed: {exc}")
        dist = np.asarray(out.detach().cpu(), dtype=np.float64).reshape(-1)
        if dist.size != SCORE_BUCKETS:
            raise BackendError(
                f"scorer model produced {dist.size} values, expected "
                f"{SCORE_BUCKETS}"
            )
        if not np.all(np.isfinite(dist)) or dist.min() < 0:
            raise BackendError("scorer model produced an invalid distribution")
        total = float(dist.sum())
        if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
            raise BackendError(
                f"score distribution sums to {total}, outside tolerance "
                f"{DISTRIBUTION_TOLERANCE}"
            )
        return dist / total

    def __call__(self, img: ImageBuffer) -> float:
        dist = self.distribution(img)
        buckets = np.arange(1, SCORE_BUCKETS + 1)
        return float(np.dot(buckets, dist))


def model_score(model: ScorerModel, img: ImageBuffer) -> float:
    return model(img)


def _resize_nearest(px: np.ndarray, height: int, width: int) -> np.ndarray:
    rows = np.floor(np.arange(height) * px.shape[0] / height).astype(int)
    cols = np.floor(np.arange(width) * px.shape[1] / width).astype(int)
    return px[rows][:, cols]


def make_scorer(spec: str):
    """Scorer from a name: ``synthetic`` or ``model:<path>``."""
    if spec == "synthetic":
        return SyntheticScorer()
    if spec.startswith("model:"):
        return ScorerModel(spec[len("model:"):])
    raise ValueError(f"unknown scorer {spec!r}")


def _check_rating(value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValueError(f"rating must be an integer, got {value!r}")
    if not (1 <= int(value) <= 10):
        raise ValueError(f"rating must lie in [1, 10], got {value}")
    return int(value)


@dataclass(frozen=True)
class RatingBallot:
    """One participant's integer ratings for every image of a generation."""

    participant_id: str
    generation: int
    ratings: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.participant_id or not isinstance(self.participant_id, str):
            raise ValueError("participant_id must be a non-empty string")
        if self.generation < 0:
            raise ValueError("generation must be non-negative")
        if not self.ratings:
            raise ValueError("ballot has no ratings")
        checked = {
            str(image_id): _check_rating(value)
            for image_id, value in self.ratings.items()
        }
        object.__setattr__(self, "ratings", checked)


@dataclass(frozen=True)
class FitnessRecord:
    """Aggregate of all participants' ratings for one image."""

    image_id: str
    per_participant: tuple
    mean: float
    sd: float
    range: tuple

    @property
    def fitness(self) -> float:
        return self.mean


def aggregate_ratings(ballots, generation: int, *, roster=None,
                      image_ids=None) -> dict:
    """Reduce one generation's ballots to per-image fitness records.

    Refuses (``AggregationError``) unless exactly one ballot per roster
    participant is present, every ballot is for ``generation``, and
    every ballot covers exactly the generation's image ids.  The result
    is independent of ballot arrival order: participants are folded in
    sorted id order.

    ``roster``/``image_ids`` default to the ballots' own participants
    and the first ballot's image ids.
    """
    ballots = list(ballots)
    if not ballots:
        raise AggregationError("no ballots to aggregate")
    for ballot in ballots:
        if ballot.generation != generation:
            raise AggregationError(
                f"ballot from {ballot.participant_id!r} is for generation "
                f"{ballot.generation}, expected {generation}"
            )
    by_participant: dict[str, RatingBallot] = {}
    for ballot in ballots:
        if ballot.participant_id in by_participant:
            raise AggregationError(
                f"duplicate ballot from {ballot.participant_id!r}"
            )
        by_participant[ballot.participant_id] = ballot

    if roster is not None:
        roster = list(roster)
        missing = sorted(set(roster) - set(by_participant))
        if missing:
            raise AggregationError(f"missing ballots from {missing}")
        unknown = sorted(set(by_participant) - set(roster))
        if unknown:
            raise AggregationError(f"ballots from unknown participants {unknown}")

    expected = set(image_ids) if image_ids is not None else set(
        ballots[0].ratings
    )
    for pid in sorted(by_participant):
        got = set(by_participant[pid].ratings)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise AggregationError(
                f"ballot from {pid!r} does not cover the generation exactly: "
                f"missing {missing}, extra {extra}"
            )

    records = {}
    participants = sorted(by_participant)
    for image_id in sorted(expected):
        values = [by_participant[pid].ratings[image_id] for pid in participants]
        arr = np.asarray(values, dtype=np.float64)
        records[image_id] = FitnessRecord(
            image_id=image_id,
            per_participant=tuple(values),
            mean=validate_fitness(arr.mean()),
            sd=float(arr.std(ddof=0)),
            range=(int(arr.min()), int(arr.max())),
        )
    return records
