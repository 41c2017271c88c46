import numpy as np
import pytest

from latentart import ProceduralBackend, RunConfig, SyntheticScorer, make_rng


@pytest.fixture(scope="session")
def backend():
    return ProceduralBackend()


@pytest.fixture(scope="session")
def scorer():
    return SyntheticScorer()


@pytest.fixture
def rng():
    return make_rng(12345)


def fast_config(**overrides) -> RunConfig:
    """Small, cheap configuration for structural tests.

    latent_dim 20 keeps the procedural backend valid (multiple of 5);
    diversity_threshold 3 stays below the typical random pairwise L1
    (about 1.128 * 20 = 22.6) so random populations pass untouched.
    """
    params = dict(
        population_size=4,
        generations=3,
        latent_dim=20,
        local_search_generations=2,
        diversity_threshold=3.0,
        hall_of_fame_size=4,
        participants=3,
        seed=99,
    )
    params.update(overrides)
    return RunConfig(**params)


@pytest.fixture(name="fast_config")
def fast_config_fixture():
    return fast_config


def rate(participant_index: int, image_index: int) -> int:
    """Deterministic scripted rating in [1, 10]."""
    return (participant_index * 7 + image_index * 3) % 10 + 1


def scripted_ballots(image_ids, roster, generation):
    """One complete ballot per roster member, ratings from ``rate``."""
    return [
        {
            "participant_id": pid,
            "generation": generation,
            "ratings": {
                image_id: rate(p, k)
                for k, image_id in enumerate(image_ids)
            },
        }
        for p, pid in enumerate(roster)
    ]
