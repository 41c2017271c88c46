"""Render a handful of procedural images and tile them into a sheet."""
import os

from latentart import (
    LatentVector,
    ProceduralBackend,
    contact_sheet,
    generate,
    make_rng,
    sample_latent,
    to_png_bytes,
    upsample,
)

OUT = os.path.join(os.path.dirname(__file__), "out", "render_images")


def main():
    os.makedirs(OUT, exist_ok=True)
    backend = ProceduralBackend()
    rng = make_rng(7)

    images = [generate(backend, sample_latent(rng)) for _ in range(9)]
    sheet = contact_sheet(images, columns=3)
    with open(os.path.join(OUT, "sheet.png"), "wb") as fh:
        fh.write(to_png_bytes(sheet))

    big = upsample(images[0], 8)
    print(f"base image {images[0].pixels.shape}, upsampled {big.pixels.shape}")
    with open(os.path.join(OUT, "upsampled.png"), "wb") as fh:
        fh.write(to_png_bytes(big))

    # the zero latent renders as a uniform mid-gray (all-zero) frame
    flat = generate(backend, LatentVector([0.0] * 100))
    print(f"zero-latent pixel range: [{flat.pixels.min()}, {flat.pixels.max()}]")
    print(f"wrote sheet.png and upsampled.png to {OUT}")


if __name__ == "__main__":
    main()
