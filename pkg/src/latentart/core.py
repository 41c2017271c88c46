"""Shared domain types, seeded randomness, and gene-space operations.

Genotypes are fixed-length real vectors evolved through a pluggable image
generator.  Everything stochastic draws from an explicitly passed
``numpy.random.Generator`` (PCG64) so that runs are reproducible from a
single 64-bit seed and serializable mid-flight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LATENT_DIM = 100

ORIGINS = ("random", "crossover-child", "clone", "mutated", "immigrant")

FITNESS_MIN = 1.0
FITNESS_MAX = 10.0


class LatentArtError(Exception):
    """Base class for errors raised by this package."""


class GenotypeMismatchError(LatentArtError):
    """Two genotypes of incompatible length were combined."""


class BackendError(LatentArtError):
    """A generator or scorer model could not be loaded or run."""


class StateError(LatentArtError):
    """An operation was applied to a run state that does not satisfy
    its precondition (e.g. stepping an unevaluated population)."""


class AggregationError(LatentArtError):
    """Rating aggregation refused: missing/duplicate/incomplete ballots."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; all stochastic operations take one of these."""
    if not (0 <= int(seed) < 2**64):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 64-bit seeds from one base seed."""
    ss = np.random.SeedSequence(int(seed))
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]


@dataclass(frozen=True)
class LatentVector:
    """Genotype: an ordered vector of finite real genes (default length 100)."""

    genes: np.ndarray

    def __post_init__(self):
        genes = np.asarray(self.genes, dtype=np.float64)
        if genes.ndim != 1 or genes.size == 0:
            raise ValueError("genes must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(genes)):
            raise ValueError("genes must all be finite")
        genes = genes.copy()
        genes.flags.writeable = False
        object.__setattr__(self, "genes", genes)

    def __len__(self) -> int:
        return int(self.genes.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatentVector):
            return NotImplemented
        return self.genes.shape == other.genes.shape and bool(
            np.array_equal(self.genes, other.genes)
        )

    def __hash__(self) -> int:
        return hash(self.genes.tobytes())


def sample_latent(rng: np.random.Generator, dim: int = LATENT_DIM) -> LatentVector:
    """Draw a fresh genotype, every gene an independent standard-normal."""
    return LatentVector(rng.standard_normal(dim))


def l1_distance(a: LatentVector, b: LatentVector) -> float:
    """Sum of absolute per-gene differences between two genotypes."""
    if len(a) != len(b):
        raise GenotypeMismatchError(
            f"incompatible genotypes: length {len(a)} vs {len(b)}"
        )
    return float(np.abs(a.genes - b.genes).sum())


def validate_fitness(value: float) -> float:
    value = float(value)
    if not (FITNESS_MIN <= value <= FITNESS_MAX) or math.isnan(value):
        raise ValueError(f"fitness must lie in [1, 10], got {value}")
    return value


@dataclass
class Individual:
    """One population member: genotype plus fitness and provenance."""

    id: str
    genotype: LatentVector
    fitness: float | None = None
    origin: str = "random"
    born_generation: int = 0

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.born_generation < 0:
            raise ValueError("born_generation must be non-negative")
        if self.fitness is not None:
            self.fitness = validate_fitness(self.fitness)

    def set_fitness(self, value: float) -> None:
        self.fitness = validate_fitness(value)

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


Population = list  # ordered sequence of Individual


@dataclass
class RunConfig:
    """Parameters of one evolutionary run."""

    population_size: int = 15
    generations: int = 25
    latent_dim: int = LATENT_DIM
    crossover_prob: float = 0.5
    gene_swap_prob: float = 0.25
    mutation_prob: float = 0.5
    per_gene_mutation_rate: float = 0.01
    local_search_generations: int = 100
    diversity_threshold: float = 25.0
    hall_of_fame_size: int = 10
    participants: int = 5
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("population_size", "generations", "latent_dim",
                     "hall_of_fame_size", "participants"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.local_search_generations < 0:
            raise ValueError("local_search_generations must be >= 0")
        for name in ("crossover_prob", "gene_swap_prob", "mutation_prob",
                     "per_gene_mutation_rate"):
            p = float(getattr(self, name))
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.diversity_threshold < 0:
            raise ValueError("diversity_threshold must be >= 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class GenerationStats:
    """Fitness summary of one evaluated generation."""

    generation: int
    mean: float
    stderr: float
    fitness: list[float]
    origins: list[str]


def mean_and_stderr(values) -> tuple[float, float]:
    """Arithmetic mean and standard error of the mean (sample SD / sqrt n)."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no values")
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


@dataclass
class RunState:
    """Complete, serializable snapshot of an evolutionary run."""

    config: RunConfig
    generation: int
    population: list[Individual]
    hall_of_fame: list[Individual] = field(default_factory=list)
    rng: np.random.Generator = None  # type: ignore[assignment]
    fitness_history: list[GenerationStats] = field(default_factory=list)

    @classmethod
    def new_run(cls, config: RunConfig) -> "RunState":
        """Generation-0 state: a fresh random population from the seed."""
        rng = make_rng(config.seed)
        population = [
            Individual(
                id=f"g0-{k}",
                genotype=sample_latent(rng, config.latent_dim),
                origin="random",
                born_generation=0,
            )
            for k in range(config.population_size)
        ]
        return cls(config=config, generation=0, population=population, rng=rng)

    def image_ids(self) -> list[str]:
        return [ind.id for ind in self.population]

    def find(self, individual_id: str) -> Individual | None:
        """Look up an individual by id in the population or hall of fame."""
        for ind in self.population:
            if ind.id == individual_id:
                return ind
        for ind in self.hall_of_fame:
            if ind.id == individual_id:
                return ind
        return None
