import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from oracles import edt_brute_force
from stegfilter.imagecore import BinaryMask, ImageGrid
from stegfilter.masksynth import EllipseParams, load_preset, rasterize_ellipse, synthesize_mask
from stegfilter.postproc import (
    binarize,
    distance_transform,
    fill_holes,
    find_markers,
    image_to_instances,
    mask_to_instances,
    watershed_instances,
)

masks = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda s: arrays(np.bool_, s)
)


def disk(shape, center, radius):
    yy, xx = np.indices(shape)
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius ** 2


def dumbbell():
    return disk((30, 40), (15, 15), 5) | disk((30, 40), (15, 24), 5)


def test_binarize_conventions():
    img = ImageGrid(np.array([[-1.0, 0.0, 0.5, -0.1]]), (-1, 1))
    assert binarize(img).values.tolist() == [[False, True, True, False]]
    assert not binarize(ImageGrid(np.full((3, 3), -1.0), (-1, 1))).values.any()
    assert binarize(img, 0.5).values.tolist() == [[False, False, True, False]]


def test_fill_holes_disk_unchanged():
    d = disk((21, 21), (10, 10), 7)
    assert fill_holes(BinaryMask(d)).values.tolist() == d.tolist()


def test_fill_holes_annulus():
    d = disk((21, 21), (10, 10), 7)
    ring = d.copy()
    ring[9:12, 9:12] = False
    filled = fill_holes(BinaryMask(ring), 64).values
    assert (filled & ~ring).sum() == 9
    np.testing.assert_array_equal(filled, d)
    # hole larger than the limit stays open
    assert (fill_holes(BinaryMask(ring), 8).values == ring).all()


def test_fill_holes_never_fills_border_background():
    m = np.ones((6, 6), bool)
    m[0, 2] = False
    m[1, 2] = False
    assert not fill_holes(BinaryMask(m), 1000).values[0, 2]


def test_fill_holes_uses_four_connectivity_for_background():
    m = np.ones((7, 7), bool)
    m[3, 3] = False
    m[2, 2] = False  # diagonal neighbour: a separate hole under 4-connectivity
    filled = fill_holes(BinaryMask(m), 1).values
    assert filled.all()


@settings(max_examples=100, deadline=None)
@given(masks, st.integers(0, 20))
def test_fill_holes_idempotent(m, area):
    once = fill_holes(BinaryMask(m), area)
    assert fill_holes(once, area) == once


def test_edt_examples():
    assert not distance_transform(BinaryMask(np.zeros((4, 4)))).values.any()
    single = np.zeros((5, 5), bool)
    single[2, 2] = True
    assert distance_transform(BinaryMask(single)).values[2, 2] == 1.0
    block = np.zeros((5, 5), bool)
    block[1:4, 1:4] = True
    d = distance_transform(BinaryMask(block)).values
    np.testing.assert_array_equal(d, edt_brute_force(block))
    assert d[2, 2] == 2.0 and d[1, 1] == 1.0


@settings(max_examples=300, deadline=None)
@given(masks)
def test_edt_matches_brute_force(m):
    d = distance_transform(BinaryMask(m)).values
    np.testing.assert_array_equal(d, edt_brute_force(m))


@settings(max_examples=100, deadline=None)
@given(masks)
def test_edt_lipschitz_and_background_zero(m):
    d = distance_transform(BinaryMask(m)).values
    if m.all():
        return
    assert np.all(d[~m] == 0)
    assert np.all(np.abs(np.diff(d, axis=0)) <= 1 + 1e-12)
    assert np.all(np.abs(np.diff(d, axis=1)) <= 1 + 1e-12)


def test_edt_agrees_with_scipy_on_large_mask():
    mask = synthesize_mask(load_preset("dsb"), 3).labels > 0
    np.testing.assert_allclose(distance_transform(BinaryMask(mask)).values,
                               ndimage.distance_transform_edt(mask), atol=1e-12)


def test_watershed_single_ellipse():
    m = rasterize_ellipse(EllipseParams((32.0, 30.0), 20.0, 8.0, 35.0), (64, 64))
    inst = mask_to_instances(BinaryMask(m))
    assert inst.instance_count == 1
    np.testing.assert_array_equal(inst.labels > 0, m)


def test_watershed_splits_dumbbell():
    m = dumbbell()
    _, n = ndimage.label(m)
    assert n == 1
    inst = mask_to_instances(BinaryMask(m))
    assert inst.instance_count == 2
    assert inst.labels[15, 15] != inst.labels[15, 24]
    assert inst.labels[15, 15] > 0 and inst.labels[15, 24] > 0


def test_watershed_empty():
    inst = mask_to_instances(BinaryMask(np.zeros((10, 10))))
    assert inst.instance_count == 0


def test_markers_respect_min_distance():
    m = dumbbell()
    dist = distance_transform(BinaryMask(m))
    markers = find_markers(dist, BinaryMask(m), min_marker_distance=20)
    assert len(markers) == 1


def test_low_component_still_gets_a_marker():
    m = np.zeros((10, 10), bool)
    m[4:6, 4:6] = True  # max distance 1 < min_marker_height
    inst = mask_to_instances(BinaryMask(m))
    assert inst.instance_count == 1 and (inst.labels > 0).sum() == 4


@settings(max_examples=50, deadline=None)
@given(masks)
def test_watershed_partitions_foreground(m):
    bm = BinaryMask(m)
    inst = watershed_instances(distance_transform(bm), bm)
    np.testing.assert_array_equal(inst.labels > 0, m)
    again = watershed_instances(distance_transform(bm), bm)
    assert inst == again


def test_watershed_instance_count_equals_markers():
    m = dumbbell() | disk((30, 40), (5, 35), 3)
    bm = BinaryMask(m)
    dist = distance_transform(bm)
    assert watershed_instances(dist, bm).instance_count == len(find_markers(dist, bm))


def test_chain_recovers_non_touching_nuclei():
    preset = load_preset("bbbc039")
    for seed in range(10):
        gt = synthesize_mask(preset, seed, separation=1)
        img = ImageGrid(np.where(gt.labels > 0, 1.0, -1.0), (-1, 1))
        assert image_to_instances(img).instance_count == gt.instance_count


def test_shape_mismatch():
    with pytest.raises(ValueError):
        watershed_instances(distance_transform(BinaryMask(np.ones((3, 3)))),
                            BinaryMask(np.ones((4, 4))))
