"""The evolutionary engine.

One generation step is: select parents by stochastic universal
sampling, build offspring by uniform crossover and cloning, optionally
improve each child with a short (1+1)-ES hill climb ("intelligent
mutation"), then replace near-duplicate children with freshly sampled
immigrants until every pairwise L1 gene distance clears the diversity
threshold.  Survivor replacement is generational: children fully
replace parents.

Fitness is assigned outside the step, either by an automatic scorer or
by aggregated human ratings; the step itself requires an evaluated
population.  All stochastic choices draw from the run state's PCG64
stream in a fixed order, so a (config, seed) pair fully determines the
run.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    GenerationStats,
    GenotypeMismatchError,
    Individual,
    LatentVector,
    RunConfig,
    RunState,
    StateError,
    l1_distance,
    mean_and_stderr,
    sample_latent,
    validate_fitness,
)
from .generator import PhenotypeCache, generate

log = logging.getLogger(__name__)

DIVERSITY_REPLACEMENT_CAP = 100


def sus_select(population, n: int, rng: np.random.Generator):
    """Stochastic universal sampling: one spin, ``n`` equally spaced pointers.

    Returns ``n`` individuals (repeats expected) in wheel order.  Each
    individual is chosen between floor and ceil of its expected count
    n * fitness / total.  Requires every fitness present and positive.
    """
    if not population:
        raise StateError("cannot select from an empty population")
    if n < 1:
        raise ValueError("n must be >= 1")
    fits = []
    for ind in population:
        if ind.fitness is None:
            raise StateError(f"individual {ind.id} has no fitness")
        if ind.fitness <= 0:
            raise StateError(f"individual {ind.id} has non-positive fitness")
        fits.append(ind.fitness)
    cumulative = np.cumsum(fits)
    total = cumulative[-1]
    spacing = total / n
    start = rng.uniform(0.0, spacing)
    pointers = start + spacing * np.arange(n)
    indices = np.searchsorted(cumulative, pointers, side="right")
    return [population[i] for i in indices]


def uniform_crossover(a: LatentVector, b: LatentVector, gene_swap_prob: float,
                      rng: np.random.Generator) -> LatentVector:
    """Child starts as a copy of ``a``; each gene independently swaps to
    ``b``'s value with probability ``gene_swap_prob``."""
    if len(a) != len(b):
        raise GenotypeMismatchError(
            f"cannot cross genotypes of length {len(a)} and {len(b)}"
        )
    if not (0.0 <= gene_swap_prob <= 1.0):
        raise ValueError("gene_swap_prob must lie in [0, 1]")
    mask = rng.random(len(a)) < gene_swap_prob
    return LatentVector(np.where(mask, b.genes, a.genes))


@dataclass(frozen=True)
class LocalSearchTrace:
    """Best-so-far score per (1+1)-ES generation, including the start."""

    initial_score: float
    scores: tuple
    accepted_steps: int


def local_search(z: LatentVector, scorer, backend, generations: int,
                 per_gene_rate: float, rng: np.random.Generator):
    """(1+1)-ES hill climb on the automatic scorer.

    Each generation perturbs every gene independently with probability
    ``per_gene_rate`` by adding a standard-normal draw; the candidate
    replaces the incumbent only on a strict score improvement (ties
    keep the incumbent).  Returns (best genotype, trace); the trace is
    non-decreasing with ``generations + 1`` entries.
    """
    if generations < 0:
        raise ValueError("generations must be >= 0")
    best = z
    best_score = validate_fitness(scorer(generate(backend, z)))
    scores = [best_score]
    accepted = 0
    dim = len(z)
    for _ in range(generations):
        mask = rng.random(dim) < per_gene_rate
        step = rng.standard_normal(dim)
        if mask.any():
            candidate = LatentVector(best.genes + np.where(mask, step, 0.0))
            score = validate_fitness(scorer(generate(backend, candidate)))
            if score > best_score:
                best, best_score = candidate, score
                accepted += 1
        # an empty mask leaves the child identical to the parent, and a
        # tie keeps the parent, so generating/scoring is skipped; the
        # rng draws above still happen to keep the stream aligned
        scores.append(best_score)
    return best, LocalSearchTrace(
        initial_score=scores[0], scores=tuple(scores), accepted_steps=accepted
    )


def make_offspring(parents, config: RunConfig, scorer, backend,
                   rng: np.random.Generator, *, generation: int):
    """Produce ``config.population_size`` unevaluated children.

    Per child: with probability ``crossover_prob`` cross two distinct
    parents (uniform, swap probability ``gene_swap_prob``), otherwise
    clone one parent; then with probability ``mutation_prob`` run the
    local search on the result.  Local-search scores are discarded —
    fitness is left unset for the evaluation phase.
    """
    if not parents:
        raise StateError("cannot breed from an empty parent pool")
    pool = list(parents)
    distinct_ids = {p.id for p in pool}
    children = []
    for k in range(config.population_size):
        crossed = rng.random() < config.crossover_prob
        if crossed and len(distinct_ids) >= 2:
            while True:
                i, j = rng.choice(len(pool), size=2, replace=False)
                if pool[i].id != pool[j].id:
                    break
            genotype = uniform_crossover(
                pool[i].genotype, pool[j].genotype, config.gene_swap_prob, rng
            )
            origin = "crossover-child"
        else:
            genotype = pool[rng.integers(len(pool))].genotype
            origin = "clone"
        if rng.random() < config.mutation_prob:
            genotype, _ = local_search(
                genotype, scorer, backend, config.local_search_generations,
                config.per_gene_mutation_rate, rng,
            )
            origin = "mutated"
        children.append(Individual(
            id=f"g{generation}-{k}",
            genotype=genotype,
            origin=origin,
            born_generation=generation,
        ))
    return children


@dataclass
class DiversityResult:
    population: list
    immigrants_inserted: int
    cap_exceeded: bool


def enforce_diversity(population, threshold: float, scorer, backend,
                      config: RunConfig, rng: np.random.Generator, *,
                      id_start: int | None = None) -> DiversityResult:
    """Replace near-duplicates with locally searched random immigrants.

    Scans all pairs; when a pair's L1 gene distance falls strictly
    below ``threshold``, the higher-index member is replaced by a fresh
    standard-normal sample run through the local search, and the scan
    restarts.  Gives up (``cap_exceeded``) after 100 replacements in
    one call, returning the partially repaired population.
    """
    members = list(population)
    generation = max((m.born_generation for m in members), default=0)
    next_k = len(members) if id_start is None else id_start
    inserted = 0
    while True:
        offender = None
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if l1_distance(members[i].genotype,
                               members[j].genotype) < threshold:
                    offender = j
                    break
            if offender is not None:
                break
        if offender is None:
            return DiversityResult(members, inserted, False)
        if inserted >= DIVERSITY_REPLACEMENT_CAP:
            log.warning(
                "diversity enforcement hit the %d-replacement cap; "
                "returning a population that still has near-duplicates",
                DIVERSITY_REPLACEMENT_CAP,
            )
            return DiversityResult(members, inserted, True)
        genotype, _ = local_search(
            sample_latent(rng, config.latent_dim), scorer, backend,
            config.local_search_generations, config.per_gene_mutation_rate,
            rng,
        )
        members[offender] = Individual(
            id=f"g{generation}-{next_k}",
            genotype=genotype,
            origin="immigrant",
            born_generation=generation,
        )
        next_k += 1
        inserted += 1


def evaluate_population(population, scorer, backend,
                        cache: PhenotypeCache | None = None) -> None:
    """Assign automatic-scorer fitness to every unevaluated member."""
    for ind in population:
        if ind.fitness is None:
            img = (cache.get_or_generate(ind, backend) if cache is not None
                   else generate(backend, ind.genotype))
            ind.set_fitness(scorer(img))


def assign_rating_fitness(population, records) -> None:
    """Assign fitness from aggregated rating records (keyed by image id)."""
    missing = [ind.id for ind in population if ind.id not in records]
    if missing:
        raise StateError(f"no fitness records for {missing}")
    for ind in population:
        ind.set_fitness(records[ind.id].mean)


def update_hall_of_fame(state: RunState) -> None:
    """Fold the current evaluated population into the hall of fame.

    The hall keeps the best ``hall_of_fame_size`` individuals seen so
    far, deduplicated by genotype (best fitness wins), sorted by
    fitness descending.
    """
    best_by_genotype = {}
    for ind in list(state.hall_of_fame) + list(state.population):
        if ind.fitness is None:
            raise StateError(f"individual {ind.id} has no fitness")
        held = best_by_genotype.get(ind.genotype)
        if held is None or ind.fitness > held.fitness:
            best_by_genotype[ind.genotype] = ind
    ranked = sorted(
        best_by_genotype.values(), key=lambda ind: (-ind.fitness, ind.id)
    )
    state.hall_of_fame = ranked[:state.config.hall_of_fame_size]


def record_fitness_history(state: RunState) -> GenerationStats:
    """Append the current generation's fitness summary to the history."""
    for ind in state.population:
        if ind.fitness is None:
            raise StateError(f"individual {ind.id} has no fitness")
    mean, stderr = mean_and_stderr(ind.fitness for ind in state.population)
    entry = GenerationStats(
        generation=state.generation,
        mean=mean,
        stderr=stderr,
        fitness=[float(ind.fitness) for ind in state.population],
        origins=[ind.origin for ind in state.population],
    )
    state.fitness_history.append(entry)
    return entry


def step_generation(state: RunState, scorer, backend) -> RunState:
    """Advance an evaluated state by one generation (in place).

    Updates the hall of fame, selects parents, breeds, enforces
    diversity, installs the children as the new population, and
    increments the generation counter.  The new population is
    unevaluated.
    """
    for ind in state.population:
        if ind.fitness is None:
            raise StateError(
                f"cannot step: individual {ind.id} has no fitness"
            )
    update_hall_of_fame(state)
    config = state.config
    parents = sus_select(state.population, config.population_size, state.rng)
    children = make_offspring(
        parents, config, scorer, backend, state.rng,
        generation=state.generation + 1,
    )
    result = enforce_diversity(
        children, config.diversity_threshold, scorer, backend, config,
        state.rng,
    )
    state.population = result.population
    state.generation += 1
    return state


def run_automatic(config: RunConfig, scorer, backend, *, on_generation=None):
    """Run a whole evolution with the automatic scorer as the critic.

    Evaluates and records every generation from 0 through
    ``config.generations`` inclusive, stepping between them; the hall
    of fame also absorbs the final generation.  Returns the finished
    state and its fitness history (``generations + 1`` entries).
    """
    state = RunState.new_run(config)
    cache = PhenotypeCache(max_entries=4 * config.population_size)
    for g in range(config.generations + 1):
        evaluate_population(state.population, scorer, backend, cache=cache)
        record_fitness_history(state)
        if on_generation is not None:
            on_generation(state)
        if g < config.generations:
            step_generation(state, scorer, backend)
    update_hall_of_fame(state)
    return state, state.fitness_history


def write_fitness_csv(history, path: str) -> None:
    """Flatten a fitness history to CSV, one row per individual."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["generation", "individual_index", "fitness", "origin", "mean",
             "stderr"]
        )
        for entry in history:
            for k, (fitness, origin) in enumerate(
                zip(entry.fitness, entry.origins)
            ):
                writer.writerow([
                    entry.generation, k, repr(float(fitness)), origin,
                    repr(float(entry.mean)), repr(float(entry.stderr)),
                ])
