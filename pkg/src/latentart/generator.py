"""Genotype-to-image mapping.

Two interchangeable backends produce 256x144 RGB images with pixel
values in [-1, 1]:

* ``ProceduralBackend`` — a deterministic closed-form renderer.  The
  genotype is read as 20 quintuples (amplitude, x-frequency,
  y-frequency, phase, channel shift) of plane waves summed per pixel
  and squashed through tanh.  Implemented separably: the wave argument
  splits into a row term and a column term, so each channel reduces to
  two (H, waves) @ (waves, W) matrix products instead of a per-pixel
  loop.
* ``ModelBackend`` — a TorchScript graph mapping a latent batch
  [n, 100] to an image batch [n, 3, 144, 256].  Loaded lazily so the
  core package works without torch installed.

All pixel math is float64; 8-bit encoding happens only at the PNG
boundary.
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .core import BackendError, Individual, LatentVector

BASE_WIDTH = 256
BASE_HEIGHT = 144
GENES_PER_WAVE = 5
DISPLAY_UPSAMPLE = 8


@dataclass(frozen=True)
class ImageBuffer:
    """An RGB image as a (height, width, 3) float array in [-1, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        if px.min() < -1.0 or px.max() > 1.0:
            raise ValueError("pixels must lie in [-1, 1]")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class ProceduralBackend:
    """Closed-form plane-wave renderer; needs no model file.

    Continuity: a pixel is tanh(S/n) with S = sum_i a_i*sin(theta_i),
    theta_i = 2*pi*(fx_i*u + fy_i*v) + phase_i + k*shift_i, |tanh'| <= 1,
    |u|,|v| <= 1 and the channel index k <= 2.  Per unit change the
    partial derivatives are bounded by 1/n for amplitude genes and by
    2*pi*|a_i|/n for frequency/phase/shift genes, so for genotypes z,
    z' the per-pixel output difference obeys

        |F(z) - F(z')| <= L * l1_distance(z, z'),
        L = max(1, 2*pi*Amax) / n_waves,

    where Amax is the largest |amplitude| over both genotypes (the
    amplitudes along the line between them are convex combinations, so
    the bound holds along the whole path).
    """

    kind = "procedural"

    def generate(self, z: LatentVector) -> ImageBuffer:
        genes = z.genes
        if len(genes) % GENES_PER_WAVE != 0:
            raise BackendError(
                f"procedural generator needs a genotype length divisible by "
                f"{GENES_PER_WAVE}, got {len(genes)}"
            )
        waves = genes.reshape(-1, GENES_PER_WAVE)
        amp, fx, fy, phase, shift = waves.T
        n = waves.shape[0]

        u = np.linspace(0.0, 1.0, BASE_WIDTH)
        v = np.linspace(0.0, 1.0, BASE_HEIGHT)

        # theta[i, r, c] = 2*pi*(fx_i*u_c + fy_i*v_r) + phase_i + k*shift_i
        # splits as Q[i, r] + P[i, c] (+ k*shift_i), so sin/cos of theta
        # come from angle addition on the row and column parts.
        p = 2.0 * np.pi * np.outer(fx, u)  # (n, W)
        q = 2.0 * np.pi * np.outer(fy, v) + phase[:, None]  # (n, H)
        sin_p, cos_p = np.sin(p), np.cos(p)
        sin_q, cos_q = np.sin(q), np.cos(q)

        out = np.empty((BASE_HEIGHT, BASE_WIDTH, 3))
        for k in range(3):
            alpha = amp * np.cos(k * shift)  # weight of sin(theta_i)
            beta = amp * np.sin(k * shift)  # weight of cos(theta_i)
            row_sin = (alpha[:, None] * sin_q + beta[:, None] * cos_q).T  # (H, n)
            row_cos = (alpha[:, None] * cos_q - beta[:, None] * sin_q).T
            out[:, :, k] = row_sin @ cos_p + row_cos @ sin_p
        return ImageBuffer(np.tanh(out / n))


class ModelBackend:
    """TorchScript generator graph: [batch, 100] -> [batch, 3, 144, 256]."""

    kind = "model"

    def __init__(self, path: str):
        self.path = path
        self._model = None
        self._lock = threading.Lock()

    def _load(self):
        if self._model is None:
            try:
                import torch
            except ImportError:
                raise BackendError(
                    "model generator requires torch; install the 'model' extra"
                )
            try:
                self._model = torch.jit.load(self.path, map_location="cpu")
                self._model.eval()
            except (OSError, RuntimeError, ValueError) as exc:
                raise BackendError(f"cannot load generator model {self.path}: {exc}")
        return self._model

    def generate(self, z: LatentVector) -> ImageBuffer:
        import torch

        if len(z) != 100:
            raise BackendError(
                f"model generator expects genotype length 100, got {len(z)}"
            )
        model = self._load()
        batch = torch.as_tensor(z.genes.copy(), dtype=torch.float32).unsqueeze(0)
        with self._lock, torch.no_grad():
            try:
                result = model(batch)
            except RuntimeError as exc:
                raise BackendError(f"generator model failed: {exc}")
        arr = np.asarray(result.detach().cpu(), dtype=np.float64)
        if arr.shape != (1, 3, BASE_HEIGHT, BASE_WIDTH):
            raise BackendError(
                f"generator model produced shape {arr.shape}, expected "
                f"(1, 3, {BASE_HEIGHT}, {BASE_WIDTH})"
            )
        return ImageBuffer(np.clip(arr[0].transpose(1, 2, 0), -1.0, 1.0))


def make_generator_backend(spec: str):
    """Backend from a name: ``procedural`` or ``model:<path>``."""
    if spec == "procedural":
        return ProceduralBackend()
    if spec.startswith("model:"):
        return ModelBackend(spec[len("model:"):])
    raise ValueError(f"unknown generator backend {spec!r}")


def generate(backend, z: LatentVector) -> ImageBuffer:
    """Render a genotype through the given backend."""
    img = backend.generate(z)
    if (img.height, img.width) != (BASE_HEIGHT, BASE_WIDTH):
        raise BackendError(
            f"backend produced {img.width}x{img.height}, expected "
            f"{BASE_WIDTH}x{BASE_HEIGHT}"
        )
    return img


def upsample(img: ImageBuffer, factor: int) -> ImageBuffer:
    """Nearest-neighbour integer upscale (each pixel becomes a block)."""
    if int(factor) < 1:
        raise ValueError("factor must be >= 1")
    f = int(factor)
    px = np.repeat(np.repeat(img.pixels, f, axis=0), f, axis=1)
    return ImageBuffer(px)


def to_uint8(img: ImageBuffer) -> np.ndarray:
    # byte = floor((p + 1) / 2 * 255 + 0.5): -1 -> 0, 0 -> 128, +1 -> 255
    return np.floor((img.pixels + 1.0) / 2.0 * 255.0 + 0.5).astype(np.uint8)


def to_png_bytes(img: ImageBuffer) -> bytes:
    """Deterministic PNG encoding (RGB, no alpha)."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: ImageBuffer, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(to_png_bytes(img))


def display_png_bytes(img: ImageBuffer, factor: int = DISPLAY_UPSAMPLE) -> bytes:
    """PNG at display resolution (x8 by default: 2048x1152)."""
    return to_png_bytes(upsample(img, factor))


class PhenotypeCache:
    """Memoizes id -> rendered image.

    Safe because an individual's genotype never changes once assigned
    an id; new genotypes always get new ids.
    """

    def __init__(self, max_entries: int = 64):
        self.max_entries = max_entries
        self._images: dict[str, ImageBuffer] = {}

    def get_or_generate(self, ind: Individual, backend) -> ImageBuffer:
        img = self._images.get(ind.id)
        if img is None:
            img = generate(backend, ind.genotype)
            if len(self._images) >= self.max_entries:
                self._images.pop(next(iter(self._images)))
            self._images[ind.id] = img
        return img

    def clear(self) -> None:
        self._images.clear()


def contact_sheet(images: list[ImageBuffer], columns: int = 5,
                  pad: int = 4) -> ImageBuffer:
    """Tile images into a grid on a dark background."""
    if not images:
        raise ValueError("no images to tile")
    h, w = images[0].height, images[0].width
    if any((img.height, img.width) != (h, w) for img in images):
        raise ValueError("all tiles must share one size")
    cols = min(columns, len(images))
    rows = (len(images) + cols - 1) // cols
    sheet = np.full(
        (rows * h + pad * (rows + 1), cols * w + pad * (cols + 1), 3), -1.0
    )
    for k, img in enumerate(images):
        r, c = divmod(k, cols)
        top = pad + r * (h + pad)
        left = pad + c * (w + pad)
        sheet[top:top + h, left:left + w] = img.pixels
    return ImageBuffer(sheet)
