"""Command-line entry points.

Subcommands:

* ``run-auto``      — full evolution runs driven by the automatic scorer
* ``local-search``  — batch (1+1)-ES hill climbs from random starts
* ``serve``         — the collaborative rating HTTP service
* ``evaluate``      — build pairwise preference trials / score responses
* ``export``        — render CSVs and PNGs from a saved run state

Every flag can also be set through an environment variable with the
``LATENTART_`` prefix (e.g. ``LATENTART_SEED=7``); explicit flags win
over the environment, which wins over config-file values and built-in
defaults.  Every file written is reproducible from (config, seed).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .charts import aggregate_runs, save_fitness_curve
from .core import LatentArtError, RunConfig, make_rng, sample_latent, spawn_seeds
from .documents import DocumentError, load_config, load_run_state, save_run_state, write_json_atomic
from .evaluation import (
    build_trials,
    preference_proportions,
    read_responses_csv,
    summarize_preferences,
    write_proportions_csv,
    write_trials_csv,
)
from .evolution import local_search, run_automatic, write_fitness_csv
from .generator import (
    PhenotypeCache,
    contact_sheet,
    display_png_bytes,
    generate,
    make_generator_backend,
    save_png,
    to_png_bytes,
    upsample,
)
from .scoring import make_scorer
from .service import ServiceConfig, serve as serve_service

ENV_PREFIX = "LATENTART_"


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))


def _resolve(flag_value, name: str, default, cast=str):
    """flag > environment > default."""
    if flag_value is not None:
        return flag_value
    raw = _env(name)
    if raw is not None:
        return cast(raw)
    return default


def _load_run_config(args) -> RunConfig:
    path = _resolve(args.config, "config", None)
    config = load_config(path) if path else RunConfig()
    seed = _resolve(args.seed, "seed", None, int)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def _make_backends(args):
    generator = _resolve(args.generator, "generator", "procedural")
    scorer = _resolve(args.scorer, "scorer", "synthetic")
    return make_generator_backend(generator), make_scorer(scorer)


def _write_display_png(img, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(display_png_bytes(img))


def cmd_run_auto(args) -> int:
    config = _load_run_config(args)
    backend, scorer = _make_backends(args)
    out = _resolve(args.out, "out", "out/run-auto")
    runs = _resolve(args.runs, "runs", 1, int)
    if runs < 1:
        raise LatentArtError("--runs must be >= 1")
    seeds = [config.seed] if runs == 1 else spawn_seeds(config.seed, runs)
    histories = []
    for r, seed in enumerate(seeds):
        run_config = replace(config, seed=seed)
        run_dir = os.path.join(out, f"run-{r:02d}")
        sheets_dir = os.path.join(run_dir, "sheets")
        hof_dir = os.path.join(run_dir, "hof")
        os.makedirs(sheets_dir, exist_ok=True)
        os.makedirs(hof_dir, exist_ok=True)
        cache = PhenotypeCache(4 * run_config.population_size)

        def write_sheet(state):
            images = [cache.get_or_generate(ind, backend)
                      for ind in state.population]
            sheet = contact_sheet(images)
            save_png(upsample(sheet, 2),
                     os.path.join(sheets_dir,
                                  f"gen-{state.generation:04d}.png"))

        state, history = run_automatic(run_config, scorer, backend,
                                       on_generation=write_sheet)
        write_fitness_csv(history, os.path.join(run_dir, "fitness.csv"))
        save_run_state(state, os.path.join(run_dir, "state.json"))
        for rank, ind in enumerate(state.hall_of_fame):
            img = cache.get_or_generate(ind, backend)
            _write_display_png(
                img, os.path.join(hof_dir, f"hof-{rank:02d}.png")
            )
        means = [e.mean for e in history]
        stderrs = [e.stderr for e in history]
        save_fitness_curve(means, stderrs,
                           os.path.join(run_dir, "fitness-curve.png"),
                           title=f"run {r} (seed {seed})")
        histories.append(history)
        print(f"run {r}: seed {seed}, mean fitness "
              f"{means[0]:.3f} -> {means[-1]:.3f}")
    if runs > 1:
        means, stderrs = aggregate_runs(histories)
        save_fitness_curve(means, stderrs,
                           os.path.join(out, "fitness-curve.png"),
                           title=f"mean of {runs} runs")
    print(f"wrote results to {out}")
    return 0


def cmd_local_search(args) -> int:
    config = _load_run_config(args)
    backend, scorer = _make_backends(args)
    out = _resolve(args.out, "out", "out/local-search")
    count = _resolve(args.count, "count", 20, int)
    if count < 1:
        raise LatentArtError("--count must be >= 1")
    os.makedirs(out, exist_ok=True)
    rng = make_rng(config.seed)
    rows = []
    for k in range(count):
        z = sample_latent(rng, config.latent_dim)
        _write_display_png(generate(backend, z),
                           os.path.join(out, f"image-{k:02d}-before.png"))
        improved, trace = local_search(
            z, scorer, backend, config.local_search_generations,
            config.per_gene_mutation_rate, rng,
        )
        _write_display_png(generate(backend, improved),
                           os.path.join(out, f"image-{k:02d}-after.png"))
        with open(os.path.join(out, f"trace-{k:02d}.csv"), "w",
                  newline="") as fh:
            fh.write("generation,best_score\n")
            for g, score in enumerate(trace.scores):
                fh.write(f"{g},{score!r}\n")
        rows.append((k, trace.initial_score, trace.scores[-1],
                     trace.accepted_steps))
        print(f"image {k:02d}: {trace.initial_score:.3f} -> "
              f"{trace.scores[-1]:.3f} ({trace.accepted_steps} accepted)")
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        fh.write("image_index,initial_score,final_score,improvement,"
                 "accepted_steps\n")
        for k, initial, final, accepted in rows:
            fh.write(f"{k},{initial!r},{final!r},{final - initial!r},"
                     f"{accepted}\n")
    mean_gain = sum(final - initial for _, initial, final, _ in rows) / len(rows)
    print(f"mean improvement over {count} starts: {mean_gain:.3f}")
    return 0


def cmd_serve(args) -> int:
    config = ServiceConfig.from_file(_resolve(args.config, "config", None))
    config.host = _resolve(None, "host", config.host)
    config.port = _resolve(None, "port", config.port, int)
    config.data_dir = _resolve(None, "data_dir", config.data_dir)
    config.generator = _resolve(args.generator, "generator", config.generator)
    config.scorer = _resolve(args.scorer, "scorer", config.scorer)
    serve_service(config)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_run_config(args)
    backend, scorer = _make_backends(args)
    out = _resolve(args.out, "out", "out/evaluate")
    count = _resolve(args.count, "count", 20, int)
    condition = args.condition
    images_dir = os.path.join(out, "images")
    os.makedirs(images_dir, exist_ok=True)
    rng = make_rng(config.seed)

    genotypes = {}
    if condition == "local_search_vs_original":
        candidates, comparators = [], []
        for k in range(count):
            z = sample_latent(rng, config.latent_dim)
            improved, _ = local_search(
                z, scorer, backend, config.local_search_generations,
                config.per_gene_mutation_rate, rng,
            )
            genotypes[f"ls-{k:02d}-before"] = z
            genotypes[f"ls-{k:02d}-after"] = improved
            candidates.append(f"ls-{k:02d}-after")
            comparators.append(f"ls-{k:02d}-before")
    else:
        if not args.state:
            raise LatentArtError(
                f"condition {condition!r} needs --state with a finished run"
            )
        state = load_run_state(args.state)
        hall = state.hall_of_fame
        if not hall:
            raise LatentArtError("run state has an empty hall of fame")
        n = min(count, len(hall))
        candidates, comparators = [], []
        for ind in hall[:n]:
            genotypes[ind.id] = ind.genotype
            candidates.append(ind.id)
        for k in range(n):
            genotypes[f"rnd-{k:02d}"] = sample_latent(rng, config.latent_dim)
            comparators.append(f"rnd-{k:02d}")
    trials = build_trials(condition, candidates, comparators, rng)
    write_trials_csv(trials, os.path.join(out, "trials.csv"))
    for image_id, z in genotypes.items():
        _write_display_png(generate(backend, z),
                           os.path.join(images_dir, f"{image_id}.png"))
    print(f"wrote {len(trials)} trials and {len(genotypes)} images to {out}")

    responses_path = _resolve(args.responses, "responses", None)
    if responses_path:
        responses = read_responses_csv(responses_path)
        summary = summarize_preferences(trials, responses)
        proportions = preference_proportions(trials, responses)
        write_proportions_csv(proportions, os.path.join(out, "results.csv"))
        write_json_atomic(
            {
                "version": 1,
                "kind": "preference-summary",
                "condition": summary.condition,
                "responses": summary.responses,
                "candidate_chosen": summary.candidate_chosen,
                "proportion": summary.proportion,
                "p_value": summary.p_value,
                "mean_trial_proportion": summary.mean,
                "stderr_trial_proportion": summary.stderr,
            },
            os.path.join(out, "summary.json"),
        )
        print(f"candidate chosen {summary.candidate_chosen}/"
              f"{summary.responses} ({summary.proportion:.1%}), "
              f"one-sided binomial p = {summary.p_value:.3g}")
    else:
        print("no --responses given; collect choices, then re-run with "
              "--responses PATH")
    return 0


def cmd_export(args) -> int:
    state = load_run_state(args.state)
    backend, _ = _make_backends(args)
    out = _resolve(args.out, "out", "out/export")
    hof_dir = os.path.join(out, "hof")
    os.makedirs(hof_dir, exist_ok=True)
    write_fitness_csv(state.fitness_history, os.path.join(out, "fitness.csv"))
    if state.fitness_history:
        means = [e.mean for e in state.fitness_history]
        stderrs = [e.stderr for e in state.fitness_history]
        save_fitness_curve(means, stderrs,
                           os.path.join(out, "fitness-curve.png"))
    images = [generate(backend, ind.genotype) for ind in state.population]
    save_png(upsample(contact_sheet(images), 2),
             os.path.join(out, "population.png"))
    for rank, ind in enumerate(state.hall_of_fame):
        _write_display_png(generate(backend, ind.genotype),
                           os.path.join(hof_dir, f"hof-{rank:02d}.png"))
    print(f"exported run at generation {state.generation} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentart",
        description="evolve generated images with automatic or human critics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=False, count=False, state=False):
        p.add_argument("--config", help="JSON config document")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--scorer",
                       help="automatic scorer: synthetic or model:PATH")
        p.add_argument("--generator",
                       help="image generator: procedural or model:PATH")
        if runs:
            p.add_argument("--runs", type=int, help="number of seeded runs")
        if count:
            p.add_argument("--count", type=int, help="number of items")
        if state:
            p.add_argument("--state", help="saved run-state JSON")

    p = sub.add_parser("run-auto",
                       help="run evolution with the automatic scorer")
    common(p, runs=True)
    p.set_defaults(func=cmd_run_auto)

    p = sub.add_parser("local-search",
                       help="hill-climb random images with the (1+1)-ES")
    common(p, count=True)
    p.set_defaults(func=cmd_local_search)

    p = sub.add_parser("serve", help="start the collaborative rating service")
    common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("evaluate", help="pairwise preference studies")
    common(p, count=True, state=True)
    p.add_argument("--condition", required=True,
                   help="local_search_vs_original, automatic_vs_random, "
                        "or collaborative_vs_random")
    p.add_argument("--responses", help="responses CSV to summarize")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="render artifacts from a run state")
    common(p)
    p.add_argument("--state", required=True, help="saved run-state JSON")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LatentArtError, DocumentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
