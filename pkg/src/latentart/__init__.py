"""Collaborative latent-variable evolution of generated images.

A fixed-length standard-normal gene vector is the genotype; a pluggable
generator maps it to an RGB image; fitness comes from an automatic
scorer or from aggregated human ratings collected over HTTP.  Evolution
combines fitness-proportional selection, uniform crossover, a (1+1)-ES
hill climb as mutation, and diversity-preserving random immigrants.
"""

from .core import (
    LATENT_DIM,
    AggregationError,
    BackendError,
    GenerationStats,
    GenotypeMismatchError,
    Individual,
    LatentArtError,
    LatentVector,
    RunConfig,
    RunState,
    StateError,
    l1_distance,
    make_rng,
    sample_latent,
    spawn_seeds,
)
from .charts import (
    aggregate_runs,
    render_fitness_curve,
    save_fitness_curve,
)
from .documents import (
    DocumentError,
    load_config,
    load_run_state,
    save_config,
    save_run_state,
)
from .evaluation import (
    PreferenceProportions,
    PreferenceSummary,
    Response,
    Trial,
    build_trials,
    count_candidate_choices,
    exact_binomial_test,
    preference_proportions,
    read_responses_csv,
    read_trials_csv,
    summarize_preferences,
    write_proportions_csv,
    write_responses_csv,
    write_trials_csv,
)
from .evolution import (
    DiversityResult,
    LocalSearchTrace,
    assign_rating_fitness,
    enforce_diversity,
    evaluate_population,
    local_search,
    make_offspring,
    record_fitness_history,
    run_automatic,
    step_generation,
    sus_select,
    uniform_crossover,
    update_hall_of_fame,
    write_fitness_csv,
)
from .generator import (
    ImageBuffer,
    ModelBackend,
    PhenotypeCache,
    ProceduralBackend,
    contact_sheet,
    generate,
    make_generator_backend,
    to_png_bytes,
    upsample,
)
from .scoring import (
    FitnessRecord,
    RatingBallot,
    ScorerModel,
    SyntheticScorer,
    aggregate_ratings,
    make_scorer,
    synthetic_score,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
