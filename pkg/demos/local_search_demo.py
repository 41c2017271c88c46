"""One (1+1)-ES hill climb on the synthetic scorer, before/after images."""
import os

from latentart import (
    ProceduralBackend,
    SyntheticScorer,
    generate,
    local_search,
    make_rng,
    sample_latent,
    to_png_bytes,
    upsample,
)

OUT = os.path.join(os.path.dirname(__file__), "out", "local_search")


def main():
    os.makedirs(OUT, exist_ok=True)
    backend = ProceduralBackend()
    scorer = SyntheticScorer()
    rng = make_rng(42)

    z = sample_latent(rng)
    refined, trace = local_search(z, scorer, backend, 100, 0.01, rng)

    print(f"initial score  {trace.initial_score:.4f}")
    for g in (10, 25, 50, 100):
        print(f"after gen {g:3d}  {trace.scores[g]:.4f}")
    accepted = sum(
        1 for a, b in zip(trace.scores, trace.scores[1:]) if b > a
    )
    print(f"{accepted} of 100 mutations accepted")

    for name, latent in (("before", z), ("after", refined)):
        img = upsample(generate(backend, latent), 4)
        with open(os.path.join(OUT, f"{name}.png"), "wb") as fh:
            fh.write(to_png_bytes(img))
    print(f"wrote before.png and after.png to {OUT}")


if __name__ == "__main__":
    main()
