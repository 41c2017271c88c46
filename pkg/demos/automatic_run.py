"""A full automatic evolution run: 15 individuals, 25 generations.

The synthetic scorer stands in for human raters, so the whole loop runs
unattended and finishes in well under a minute.
"""
import os

from latentart import (
    ProceduralBackend,
    RunConfig,
    SyntheticScorer,
    contact_sheet,
    generate,
    run_automatic,
    save_fitness_curve,
    to_png_bytes,
    write_fitness_csv,
)

OUT = os.path.join(os.path.dirname(__file__), "out", "automatic_run")


def main():
    os.makedirs(OUT, exist_ok=True)
    backend = ProceduralBackend()
    config = RunConfig(seed=2026)

    def progress(state):
        entry = state.fitness_history[-1]
        print(f"generation {entry.generation:2d}: "
              f"mean {entry.mean:.3f} +- {entry.stderr:.3f}")

    state, history = run_automatic(config, SyntheticScorer(), backend,
                                   on_generation=progress)

    write_fitness_csv(history, os.path.join(OUT, "fitness.csv"))
    save_fitness_curve([e.mean for e in history],
                       [e.stderr for e in history],
                       os.path.join(OUT, "fitness-curve.png"))

    hall = [generate(backend, ind.genotype) for ind in state.hall_of_fame]
    with open(os.path.join(OUT, "hall-of-fame.png"), "wb") as fh:
        fh.write(to_png_bytes(contact_sheet(hall, columns=5)))

    best = state.hall_of_fame[0]
    print(f"best individual {best.id} scored {best.fitness:.3f}")
    print(f"wrote fitness.csv, fitness-curve.png, hall-of-fame.png to {OUT}")


if __name__ == "__main__":
    main()
