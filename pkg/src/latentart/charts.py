"""Fitness-curve rendering.

Draws mean fitness per generation with a shaded mean +/- stderr band
using PIL primitives and its built-in bitmap font only, so identical
inputs give byte-identical PNGs on every platform.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .core import mean_and_stderr

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 56, 20, 28, 44

BACKGROUND = (255, 255, 255)
AXIS = (40, 40, 40)
CURVE = (40, 80, 160)
BAND = (200, 214, 240)

FITNESS_LO, FITNESS_HI = 1.0, 10.0


def aggregate_runs(histories) -> tuple:
    """Per-generation mean of run means, with stderr across runs.

    All runs must have equally long histories.
    """
    curves = [np.asarray([e.mean for e in h], dtype=np.float64)
              for h in histories]
    if not curves:
        raise ValueError("no histories")
    length = len(curves[0])
    if any(len(c) != length for c in curves):
        raise ValueError("histories differ in length")
    stacked = np.stack(curves)
    means = []
    stderrs = []
    for g in range(length):
        m, s = mean_and_stderr(stacked[:, g])
        means.append(m)
        stderrs.append(s)
    return means, stderrs


def render_fitness_curve(means, stderrs, *, title: str = "fitness") -> bytes:
    """PNG of the mean curve with a +/- stderr band on a fixed [1, 10] axis."""
    means = [float(m) for m in means]
    stderrs = [float(s) for s in stderrs]
    if not means or len(means) != len(stderrs):
        raise ValueError("means and stderrs must be equally long and non-empty")

    image = Image.new("RGB", (WIDTH, HEIGHT), BACKGROUND)
    draw = ImageDraw.Draw(image)
    font = ImageFont.load_default()

    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP  # y grows downward

    def to_x(g: float) -> int:
        if len(means) == 1:
            return (x0 + x1) // 2
        return round(x0 + (x1 - x0) * g / (len(means) - 1))

    def to_y(value: float) -> int:
        clamped = min(max(value, FITNESS_LO), FITNESS_HI)
        frac = (clamped - FITNESS_LO) / (FITNESS_HI - FITNESS_LO)
        return round(y0 + (y1 - y0) * frac)

    if len(means) > 1:
        band = [(to_x(g), to_y(means[g] + stderrs[g]))
                for g in range(len(means))]
        band += [(to_x(g), to_y(means[g] - stderrs[g]))
                 for g in reversed(range(len(means)))]
        draw.polygon(band, fill=BAND)
        points = [(to_x(g), to_y(means[g])) for g in range(len(means))]
        draw.line(points, fill=CURVE, width=2)
    else:
        draw.ellipse(
            [to_x(0) - 3, to_y(means[0]) - 3, to_x(0) + 3, to_y(means[0]) + 3],
            fill=CURVE,
        )

    draw.line([(x0, y1), (x0, y0), (x1, y0)], fill=AXIS, width=1)
    for value in range(int(FITNESS_LO), int(FITNESS_HI) + 1):
        y = to_y(value)
        draw.line([(x0 - 4, y), (x0, y)], fill=AXIS, width=1)
        draw.text((x0 - 8, y), str(value), fill=AXIS, font=font, anchor="rm")
    tick_step = max(1, (len(means) - 1) // 5) if len(means) > 1 else 1
    for g in range(0, len(means), tick_step):
        x = to_x(g)
        draw.line([(x, y0), (x, y0 + 4)], fill=AXIS, width=1)
        draw.text((x, y0 + 8), str(g), fill=AXIS, font=font, anchor="ma")
    draw.text(((x0 + x1) // 2, y0 + 26), "generation", fill=AXIS, font=font,
              anchor="ma")
    draw.text(((x0 + x1) // 2, y1 - 16), title, fill=AXIS, font=font,
              anchor="ma")

    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def save_fitness_curve(means, stderrs, path: str, *,
                       title: str = "fitness") -> None:
    with open(path, "wb") as fh:
        fh.write(render_fitness_curve(means, stderrs, title=title))
