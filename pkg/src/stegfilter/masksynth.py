"""Synthetic nuclei masks built from rotated, non-overlapping ellipses."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imagecore import InstanceMask, as_generator

__all__ = [
    "EllipseParams",
    "PresetRow",
    "SynthesisPreset",
    "SynthesisInfo",
    "PRESETS",
    "minor_axis",
    "eccentricity",
    "sample_ellipse",
    "ellipse_footprint",
    "rasterize_ellipse",
    "synthesize_mask",
    "load_preset",
    "parse_preset_text",
]

logger = logging.getLogger(__name__)


def minor_axis(a, e):
    """Semi-minor axis ``b = a * sqrt(1 - e**2)`` of an ellipse."""
    if not a > 0:
        raise ValueError(f"semi-major axis must be positive, got {a}")
    if not 0 <= e < 1:
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
    return a * math.sqrt(1.0 - e * e)


def eccentricity(a, b):
    return math.sqrt(1.0 - (b / a) ** 2)


@dataclass(frozen=True)
class EllipseParams:
    center: tuple[float, float]  # (row, col)
    a: float
    b: float
    theta: float  # degrees

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")

    @property
    def eccentricity(self):
        return eccentricity(self.a, self.b)


@dataclass(frozen=True)
class PresetRow:
    major_axis: tuple[float, float]
    count: tuple[int, int]
    eccentricity: tuple[float, float]

    def __post_init__(self):
        (a_lo, a_hi), (n_lo, n_hi), (e_lo, e_hi) = self.major_axis, self.count, self.eccentricity
        if not 0 < a_lo <= a_hi:
            raise ValueError(f"bad major axis interval {self.major_axis}")
        if not 0 < n_lo <= n_hi:
            raise ValueError(f"bad nuclei count interval {self.count}")
        if not 0 <= e_lo <= e_hi < 1:
            raise ValueError(f"eccentricity interval {self.eccentricity} must lie in [0, 1)")


@dataclass(frozen=True)
class SynthesisPreset:
    rows: tuple[PresetRow, ...]
    canvas: tuple[int, int] = (256, 256)

    def __post_init__(self):
        if not self.rows:
            raise ValueError("a preset needs at least one row")
        object.__setattr__(self, "rows", tuple(self.rows))

    def with_canvas(self, height, width=None):
        return SynthesisPreset(self.rows, (int(height), int(width or height)))


def _rows(table):
    return tuple(PresetRow((a0, a1), (n0, n1), (e0, e1)) for a0, a1, n0, n1, e0, e1 in table)


# semi-major axis range, nuclei count range, eccentricity range
PRESETS = {
    "dsb": SynthesisPreset(_rows([
        (5, 10, 1, 150, 0.4, 0.9),
        (10, 15, 1, 40, 0.4, 0.9),
        (15, 20, 1, 40, 0.4, 0.9),
        (20, 25, 1, 40, 0.4, 0.9),
        (25, 30, 1, 20, 0.4, 0.9),
        (30, 35, 1, 20, 0.4, 0.9),
    ])),
    "bbbc039": SynthesisPreset(_rows([
        (10, 20, 20, 60, 0.6, 0.9),
        (20, 40, 20, 30, 0.6, 0.9),
    ])),
}


def parse_preset_text(text, canvas=(256, 256)):
    """Parse ``a_lo a_hi n_lo n_hi e_lo e_hi`` lines; ``#`` starts a comment."""
    table = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"preset line {lineno}: expected 6 numbers, got {len(parts)}")
        try:
            a0, a1, n0, n1, e0, e1 = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"preset line {lineno}: {exc}") from None
        if n0 != int(n0) or n1 != int(n1):
            raise ValueError(f"preset line {lineno}: nuclei counts must be integers")
        try:
            table.append(PresetRow((a0, a1), (int(n0), int(n1)), (e0, e1)))
        except ValueError as exc:
            raise ValueError(f"preset line {lineno}: {exc}") from None
    if not table:
        raise ValueError("preset file contains no rows")
    return SynthesisPreset(tuple(table), canvas)


def load_preset(source, canvas=(256, 256)):
    """Built-in preset by name (``"dsb"``, ``"bbbc039"``) or a preset text file."""
    name = str(source).lower()
    if name in PRESETS:
        return PRESETS[name].with_canvas(*canvas)
    path = Path(source)
    if path.is_file():
        return parse_preset_text(path.read_text(), canvas)
    raise ValueError(f"unknown preset {source!r}; use one of {sorted(PRESETS)} or a file path")


def sample_ellipse(row, rng=None, canvas=(256, 256)):
    """Draw one ellipse: a, e and rotation uniform, center uniform on the canvas."""
    gen = as_generator(rng)
    a = float(gen.uniform(*row.major_axis))
    e = float(gen.uniform(*row.eccentricity))
    theta = float(gen.uniform(0.0, 179.0))
    center = (float(gen.uniform(0, canvas[0] - 1)), float(gen.uniform(0, canvas[1] - 1)))
    return EllipseParams(center, a, minor_axis(a, e), theta)


def ellipse_footprint(center, semi_x, semi_y, theta, shape):
    """Pixel coordinates inside a rotated ellipse, clipped to `shape`.

    `semi_x` is the semi-axis along the column direction before rotation,
    `semi_y` along the row direction. Pixel (r, c) is inside when its centre,
    rotated by ``-theta`` about `center`, satisfies
    ``(x/semi_x)**2 + (y/semi_y)**2 <= 1``.

    Returns
    -------
    rows, cols : ndarray of int
    """
    cy, cx = center
    reach = max(semi_x, semi_y)
    r0, r1 = max(0, math.floor(cy - reach)), min(shape[0] - 1, math.ceil(cy + reach))
    c0, c1 = max(0, math.floor(cx - reach)), min(shape[1] - 1, math.ceil(cx + reach))
    if r0 > r1 or c0 > c1:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    rr, cc = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    dy, dx = rr - cy, cc - cx
    t = math.radians(theta)
    cos_t, sin_t = math.cos(t), math.sin(t)
    x = dx * cos_t + dy * sin_t
    y = -dx * sin_t + dy * cos_t
    inside = (x / semi_x) ** 2 + (y / semi_y) ** 2 <= 1.0 + 1e-9
    return rr[inside], cc[inside]


def rasterize_ellipse(ellipse, canvas):
    """Boolean raster of a single ellipse on a ``(height, width)`` canvas."""
    out = np.zeros(canvas, dtype=bool)
    rr, cc = ellipse_footprint(ellipse.center, ellipse.a, ellipse.b, ellipse.theta, canvas)
    out[rr, cc] = True
    return out


@dataclass
class SynthesisInfo:
    row_index: int
    requested: int
    ellipses: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


_EIGHT = np.ones((3, 3), dtype=bool)


def synthesize_mask(preset, rng=None, max_attempts=100, separation=0, return_info=False):
    """Place rotated ellipses on a canvas so that they touch but never overlap.

    One preset row is chosen uniformly, then the nuclei count is drawn from
    its (inclusive) integer range. Each nucleus is sampled and placed by
    rejection; a placement is rejected if any of its pixels is already
    foreground. After `max_attempts` consecutive rejections the nucleus is
    skipped and a warning is recorded.

    Parameters
    ----------
    preset : SynthesisPreset
    rng : int, numpy.random.Generator or None
    max_attempts : int
    separation : int
        Minimum gap in pixels between nuclei. 0 allows touching; 1 forbids
        8-adjacency as well.
    return_info : bool
        Also return a :class:`SynthesisInfo` with the placed ellipses.
    """
    gen = as_generator(rng)
    canvas = tuple(preset.canvas)
    row_index = int(gen.integers(len(preset.rows)))
    row = preset.rows[row_index]
    requested = int(gen.integers(row.count[0], row.count[1] + 1))
    info = SynthesisInfo(row_index, requested)

    labels = np.zeros(canvas, dtype=np.int32)
    blocked = np.zeros(canvas, dtype=bool)
    label = 0
    for k in range(requested):
        for _ in range(max_attempts):
            ell = sample_ellipse(row, gen, canvas)
            rr, cc = ellipse_footprint(ell.center, ell.a, ell.b, ell.theta, canvas)
            if rr.size and not blocked[rr, cc].any():
                break
        else:
            msg = f"nucleus {k + 1}/{requested} skipped after {max_attempts} rejected placements"
            info.warnings.append(msg)
            logger.info(msg)
            continue
        label += 1
        labels[rr, cc] = label
        info.ellipses.append(ell)
        if separation > 0:
            placed = np.zeros(canvas, dtype=bool)
            placed[rr, cc] = True
            blocked |= ndimage.binary_dilation(placed, _EIGHT, iterations=separation)
        else:
            blocked[rr, cc] = True

    mask = InstanceMask(labels)
    if return_info:
        return mask, info
    return mask
