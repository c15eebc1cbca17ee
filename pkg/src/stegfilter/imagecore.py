"""Image containers, value-range bookkeeping and grayscale PNG/TIFF I/O.

All containers are immutable: the wrapped numpy arrays are flagged read-only
on construction, so instances can be shared freely between threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "ImageGrid",
    "BinaryMask",
    "InstanceMask",
    "ImageFormatError",
    "MultiChannelError",
    "load_image",
    "save_image",
    "load_instance_mask",
    "save_instance_mask",
    "save_binary_mask",
    "normalize",
    "crop_random",
    "as_generator",
]

BIT_DEPTH_RANGES = {8: (0.0, 255.0), 16: (0.0, 65535.0)}

# Pillow modes accepted as single-channel grayscale, mapped to bit depth.
_GRAY_MODES = {"1": 8, "L": 8, "I;16": 16, "I;16B": 16, "I;16L": 16, "I": 16}


class ImageFormatError(ValueError):
    """Raised for files that are not 8/16-bit grayscale PNG or TIFF."""


class MultiChannelError(ImageFormatError):
    """Raised when a colour or alpha image is passed where grayscale is needed."""


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def as_generator(rng):
    """Return a ``numpy.random.Generator`` for a seed, a generator or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """H x W real-valued raster with the closed interval its values live in.

    Parameters
    ----------
    values : array_like
        2-D array of real numbers; stored as a read-only float64 copy.
    value_range : tuple of float, optional
        Declared ``(low, high)`` interval. Defaults to the data min/max.
    """

    values: np.ndarray
    value_range: tuple[float, float] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"ImageGrid needs a non-empty 2-D array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("ImageGrid values must be finite")
        if self.value_range is None:
            lo, hi = float(vals.min()), float(vals.max())
        else:
            lo, hi = (float(v) for v in self.value_range)
        if lo > hi:
            raise ValueError(f"invalid value range ({lo}, {hi})")
        if vals.min() < lo or vals.max() > hi:
            raise ValueError(
                f"values [{vals.min()}, {vals.max()}] fall outside the declared range ({lo}, {hi})"
            )
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "value_range", (lo, hi))

    @property
    def shape(self):
        return self.values.shape

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def widened(self, values):
        """New grid with `values`, keeping this range but widening it to fit."""
        values = np.asarray(values, dtype=np.float64)
        lo = min(self.value_range[0], float(values.min()))
        hi = max(self.value_range[1], float(values.max()))
        return ImageGrid(values, (lo, hi))

    def __eq__(self, other):
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return self.value_range == other.value_range and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean foreground raster."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError(f"BinaryMask needs a 2-D array, got shape {vals.shape}")
        object.__setattr__(self, "values", _frozen(vals.astype(bool)))

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class InstanceMask:
    """Labelled raster: 0 is background, instances carry labels 1..K.

    Every label in 1..K must occur at least once. Construct with
    :meth:`from_labels` to relabel an arbitrary integer image into that form.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"InstanceMask needs a 2-D array, got shape {lab.shape}")
        if lab.size and lab.min() < 0:
            raise ValueError("instance labels must be non-negative")
        lab = lab.astype(np.int32)
        present = np.unique(lab)
        present = present[present > 0]
        k = int(present[-1]) if present.size else 0
        if present.size != k:
            raise ValueError(f"labels must be exactly 1..{k} with every label present")
        object.__setattr__(self, "labels", _frozen(lab))

    @classmethod
    def from_labels(cls, labels):
        """Relabel so that positive labels become consecutive 1..K.

        Order of first appearance of each old label (by sorted value) is kept.
        """
        lab = np.asarray(labels)
        uniq, inv = np.unique(lab, return_inverse=True)
        mapping = np.zeros(uniq.size, dtype=np.int32)
        pos = uniq > 0
        mapping[pos] = np.arange(1, pos.sum() + 1)
        return cls(mapping[inv].reshape(lab.shape))

    @property
    def shape(self):
        return self.labels.shape

    @property
    def instance_count(self):
        return int(self.labels.max()) if self.labels.size else 0

    @property
    def foreground(self):
        return BinaryMask(self.labels > 0)

    def __eq__(self, other):
        if not isinstance(other, InstanceMask):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None


def load_image(path):
    """Read an 8- or 16-bit single-channel PNG or TIFF.

    The returned grid's declared range is the full range of the source bit
    depth, ``(0, 255)`` or ``(0, 65535)``.

    Raises
    ------
    FileNotFoundError
        If `path` does not exist.
    ImageFormatError
        If the file is not a PNG/TIFF or has an unsupported pixel mode.
    MultiChannelError
        If the image has more than one channel (RGB, RGBA, palette, ...).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            fmt, mode = im.format, im.mode
            if fmt not in ("PNG", "TIFF"):
                raise ImageFormatError(f"unsupported format {fmt!r} for {path}; need PNG or TIFF")
            if getattr(im, "n_frames", 1) > 1:
                raise ImageFormatError(f"multi-page TIFF is not supported: {path}")
            if mode not in _GRAY_MODES:
                if len(im.getbands()) > 1 or mode == "P":
                    raise MultiChannelError(f"multi-channel unsupported ({mode} image {path})")
                raise ImageFormatError(f"unsupported pixel mode {mode!r} in {path}")
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"cannot identify image file {path}") from exc
    depth = _GRAY_MODES[mode]
    if mode == "1":
        arr = arr.astype(np.uint8) * 255
    elif mode == "I" and (arr.min() < 0 or arr.max() > 65535):
        raise ImageFormatError(f"32-bit integer image {path} exceeds the 16-bit range")
    return ImageGrid(arr.astype(np.float64), BIT_DEPTH_RANGES[depth])


def _quantize(img, bit_depth):
    if bit_depth not in BIT_DEPTH_RANGES:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    top = BIT_DEPTH_RANGES[bit_depth][1]
    lo, hi = img.value_range
    if hi == lo:
        # degenerate range: store the constant itself
        scaled = np.full(img.shape, lo)
    elif (lo, hi) == (0.0, top):
        scaled = img.values
    else:
        scaled = (img.values - lo) * (top / (hi - lo))
    out = np.rint(scaled)
    if out.min() < 0 or out.max() > top:
        raise ValueError(f"values not representable at {bit_depth} bits after mapping")
    return out.astype(np.uint8 if bit_depth == 8 else np.uint16)


def save_image(img, path, bit_depth=8):
    """Write `img` as a grayscale PNG.

    The declared range is mapped linearly onto ``[0, 2**bit_depth - 1]`` and
    rounded, so a reload followed by :func:`normalize` back onto the original
    range is accurate to half a quantization step.
    """
    data = _quantize(img, bit_depth)
    _write_png(data, path)


def _write_png(data, path):
    path = Path(path)
    if path.parent and not path.parent.is_dir():
        raise OSError(f"directory does not exist: {path.parent}")
    if path.exists() and not os.access(path, os.W_OK):
        raise PermissionError(f"cannot write {path}")
    Image.fromarray(data).save(path, format="PNG")


def save_instance_mask(mask, path):
    """Write an instance mask as a 16-bit PNG whose pixel values are label ids."""
    if mask.instance_count > 65535:
        raise ValueError("more than 65535 instances cannot be stored in a 16-bit PNG")
    _write_png(mask.labels.astype(np.uint16), path)


def load_instance_mask(path):
    img = load_image(path)
    return InstanceMask.from_labels(img.values.astype(np.int64))


def save_binary_mask(mask, path):
    """Write a binary mask as an 8-bit PNG (255 = foreground)."""
    _write_png(np.where(mask.values, 255, 0).astype(np.uint8), path)


def normalize(img, target=(-1.0, 1.0)):
    """Affinely map the declared range of `img` onto `target`."""
    lo, hi = img.value_range
    if hi == lo:
        raise ValueError("cannot normalize an image with a zero-width declared range")
    t_lo, t_hi = (float(v) for v in target)
    scale = (t_hi - t_lo) / (hi - lo)
    out = t_lo + (img.values - lo) * scale
    # keep endpoints exact despite rounding
    np.clip(out, min(t_lo, t_hi), max(t_lo, t_hi), out=out)
    return ImageGrid(out, (min(t_lo, t_hi), max(t_lo, t_hi)))


def crop_random(img, size, rng=None, return_offset=False):
    """Uniformly placed ``size x size`` crop.

    Parameters
    ----------
    img : ImageGrid
    size : int
        Side length in pixels, at most ``min(img.height, img.width)``.
    rng : int, numpy.random.Generator or None
        Seed or generator; identical seeds give identical offsets.
    return_offset : bool
        Also return the ``(row, col)`` offset of the crop.
    """
    size = int(size)
    if size < 1 or size > min(img.shape):
        raise ValueError(f"crop size {size} does not fit into image of shape {img.shape}")
    gen = as_generator(rng)
    r0 = int(gen.integers(0, img.height - size + 1))
    c0 = int(gen.integers(0, img.width - size + 1))
    out = ImageGrid(img.values[r0:r0 + size, c0:c0 + size], img.value_range)
    if return_offset:
        return out, (r0, c0)
    return out
