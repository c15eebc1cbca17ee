"""Binary mask -> instance mask: hole filling, exact EDT and marker watershed.

Foreground is 8-connected, background (holes) 4-connected.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage
from skimage.morphology import local_maxima, reconstruction

from .imagecore import BinaryMask, ImageGrid, InstanceMask

__all__ = [
    "DistanceMap",
    "binarize",
    "fill_holes",
    "distance_transform",
    "find_markers",
    "watershed_instances",
    "mask_to_instances",
    "image_to_instances",
]

_INF = 1e20
_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Euclidean distance of each foreground pixel to the nearest background pixel.

    Pixels outside the image do not count as background. A mask without any
    background pixel therefore maps to ``inf`` everywhere.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def binarize(img, threshold=None):
    """Foreground where ``value >= threshold`` (default: midpoint of the declared range)."""
    if threshold is None:
        lo, hi = img.value_range
        threshold = 0.5 * (lo + hi)
    return BinaryMask(img.values >= threshold)


def fill_holes(mask, max_hole_area=64):
    """Fill enclosed background components of at most `max_hole_area` pixels.

    A background component counts as a hole only if it does not touch the
    image border.
    """
    if max_hole_area < 0:
        raise ValueError("max_hole_area must be non-negative")
    fg = mask.values
    bg_labels, n = ndimage.label(~fg, structure=_FOUR)
    if n == 0:
        return BinaryMask(fg)
    areas = np.bincount(bg_labels.ravel(), minlength=n + 1)
    border = np.unique(np.concatenate([
        bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]
    ]))
    fillable = areas <= max_hole_area
    fillable[0] = False
    fillable[border] = False
    return BinaryMask(fg | fillable[bg_labels])


@numba.njit(cache=True)
def _edt_1d(f, out, v, z):
    # Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared distances.
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@numba.njit(cache=True)
def _edt_squared(fg):
    h, w = fg.shape
    big = 1e20
    g = np.empty((h, w))
    n = max(h, w)
    f = np.empty(n)
    out = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    for c in range(w):
        for r in range(h):
            f[r] = big if fg[r, c] else 0.0
        _edt_1d(f[:h], out[:h], v, z)
        for r in range(h):
            g[r, c] = out[r]
    for r in range(h):
        for c in range(w):
            f[c] = g[r, c]
        _edt_1d(f[:w], out[:w], v, z)
        for c in range(w):
            g[r, c] = out[c]
    return g


def distance_transform(mask):
    """Exact Euclidean distance transform of a binary mask.

    Two separable passes of the 1-D lower-envelope transform, O(HW).
    Background pixels get 0.
    """
    fg = np.ascontiguousarray(mask.values, dtype=np.bool_)
    if not fg.any():
        return DistanceMap(np.zeros(fg.shape))
    if fg.all():
        return DistanceMap(np.full(fg.shape, np.inf))
    sq = _edt_squared(fg)
    return DistanceMap(np.sqrt(sq))


def find_markers(dist, mask, min_marker_distance=5.0, min_marker_height=2.0,
                 min_marker_dynamic=1.0):
    """Watershed seeds as an array of ``(row, col)`` pairs, in acceptance order.

    Candidates are the foreground maxima of `dist` (8-neighbourhood) whose
    dynamic is at least `min_marker_dynamic`, i.e. that rise at least that
    much above the saddle joining them to a higher maximum; each such
    maximum contributes its highest pixel. Candidates below
    `min_marker_height` are discarded, the rest are accepted from highest to
    lowest, ties by ``(row, col)``, dropping any candidate closer than
    `min_marker_distance` to an already accepted marker. A connected
    foreground component left without a marker gets one at its highest
    pixel, so that every foreground pixel can be flooded.
    """
    d = np.where(np.isfinite(dist.values), dist.values, _INF)
    fg = mask.values
    if min_marker_dynamic > 0:
        rec = reconstruction(d - min_marker_dynamic, d, method="dilation", footprint=_EIGHT)
    else:
        rec = d
    regions, n_reg = ndimage.label(local_maxima(rec, connectivity=2) & fg, structure=_EIGHT)
    rows, cols = np.nonzero(regions)
    # highest pixel of each region, ties by (row, col)
    order = np.lexsort((cols, rows, -d[rows, cols], regions[rows, cols]))
    first = np.ones(order.size, dtype=bool)
    first[1:] = regions[rows[order[1:]], cols[order[1:]]] != regions[rows[order[:-1]], cols[order[:-1]]]
    rows, cols = rows[order[first]], cols[order[first]]
    keep = d[rows, cols] >= min_marker_height
    rows, cols = rows[keep], cols[keep]

    order = np.lexsort((cols, rows, -d[rows, cols]))
    accepted = []
    min_sq = float(min_marker_distance) ** 2
    for idx in order:
        r, c = rows[idx], cols[idx]
        if accepted:
            acc = np.asarray(accepted)
            if np.min((acc[:, 0] - r) ** 2 + (acc[:, 1] - c) ** 2) < min_sq:
                continue
        accepted.append((r, c))

    comp, n = ndimage.label(fg, structure=_EIGHT)
    if n:
        has_marker = np.zeros(n + 1, dtype=bool)
        if accepted:
            acc = np.asarray(accepted)
            has_marker[comp[acc[:, 0], acc[:, 1]]] = True
        for lab in np.nonzero(~has_marker[1:])[0] + 1:
            rr, cc = np.nonzero(comp == lab)
            best = np.lexsort((cc, rr, -d[rr, cc]))[0]
            accepted.append((rr[best], cc[best]))
    return np.asarray(accepted, dtype=np.int64).reshape(-1, 2)


@numba.njit(cache=True)
def _flood(d, fg, markers, labels):
    h, w = d.shape
    heap = [(0.0, np.int64(0), np.int64(0))]
    heap.pop()
    for k in range(markers.shape[0]):
        r, c = markers[k, 0], markers[k, 1]
        labels[r, c] = k + 1
        heapq.heappush(heap, (-d[r, c], r, c))
    while len(heap) > 0:
        _, r, c = heapq.heappop(heap)
        lab = labels[r, c]
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                nr = r + dr
                nc = c + dc
                if (dr == 0 and dc == 0) or nr < 0 or nc < 0 or nr >= h or nc >= w:
                    continue
                if fg[nr, nc] and labels[nr, nc] == 0:
                    labels[nr, nc] = lab
                    heapq.heappush(heap, (-d[nr, nc], nr, nc))


def watershed_instances(dist, mask, min_marker_distance=5.0, min_marker_height=2.0,
                        min_marker_dynamic=1.0):
    """Split the foreground into instances by flooding `dist` from its maxima.

    Pixels are processed by a priority queue in decreasing distance order,
    ties broken by ``(row, col)``; each pixel takes the label of the
    neighbour that reached it first. The result has one instance per marker
    and covers exactly the foreground.
    """
    if dist.shape != mask.shape:
        raise ValueError("distance map and mask differ in shape")
    fg = np.ascontiguousarray(mask.values, dtype=np.bool_)
    labels = np.zeros(fg.shape, dtype=np.int32)
    markers = find_markers(dist, mask, min_marker_distance, min_marker_height,
                           min_marker_dynamic)
    if len(markers):
        d = np.where(np.isfinite(dist.values), dist.values, _INF)
        _flood(np.ascontiguousarray(d), fg, markers, labels)
    return InstanceMask(labels)


def mask_to_instances(mask, max_hole_area=64, min_marker_distance=5.0, min_marker_height=2.0,
                      min_marker_dynamic=1.0):
    """Fill holes, distance-transform and watershed a binary mask."""
    filled = fill_holes(mask, max_hole_area)
    return watershed_instances(
        distance_transform(filled), filled, min_marker_distance, min_marker_height,
        min_marker_dynamic,
    )


def image_to_instances(img, threshold=None, max_hole_area=64, min_marker_distance=5.0,
                       min_marker_height=2.0, min_marker_dynamic=1.0):
    """Full chain: binarize -> fill holes -> EDT -> watershed."""
    if not isinstance(img, ImageGrid):
        raise TypeError("expected an ImageGrid")
    return mask_to_instances(
        binarize(img, threshold), max_hole_area, min_marker_distance, min_marker_height,
        min_marker_dynamic,
    )
