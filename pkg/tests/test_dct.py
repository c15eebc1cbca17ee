import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from oracles import dct2_direct, idct2_direct
from stegfilter.dct import (
    DctCoeffs,
    build_frequency_mask,
    dct2,
    dct_filter,
    dct_matrix,
    frequency_ranking,
    idct2,
    inject_gaussian_noise,
    lowpass_filter,
    save_frequency_mask,
)
from stegfilter.imagecore import ImageGrid

small_images = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-100, 100))
)


def test_basis_is_orthonormal():
    for n in (1, 2, 3, 7, 16):
        b = dct_matrix(n)
        np.testing.assert_allclose(b @ b.T, np.eye(n), atol=1e-12)


def test_constant_2x2():
    np.testing.assert_allclose(dct2(np.ones((2, 2))).coeffs, [[2, 0], [0, 0]], atol=1e-12)


def test_impulse_2x2_all_half():
    img = np.array([[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(dct2_direct(img), 0.5)
    np.testing.assert_allclose(dct2(img).coeffs, 0.5, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(small_images)
def test_matches_direct_summation(img):
    np.testing.assert_allclose(dct2(img).coeffs, dct2_direct(img), atol=1e-6 * (1 + np.abs(img).max()))


@settings(max_examples=100, deadline=None)
@given(small_images)
def test_matches_scipy_orthonormal_dct(img):
    np.testing.assert_allclose(dct2(img).coeffs, scipy.fft.dctn(img, norm="ortho"), atol=1e-9)


def test_round_trip_256(rng):
    img = ImageGrid(rng.uniform(-1, 1, (256, 256)), (-1, 1))
    back = idct2(dct2(img))
    assert np.max(np.abs(back.values - img.values)) < 1e-4
    assert back.value_range[0] <= -1 and back.value_range[1] >= 1


def test_dc_only_is_constant():
    n, m, c = 4, 6, 0.3
    coeffs = np.zeros((n, m))
    coeffs[0, 0] = c * np.sqrt(n * m)
    np.testing.assert_allclose(idct2(coeffs).values, c, atol=1e-12)


def test_highest_frequency_basis_against_direct_inverse():
    coeffs = np.zeros((5, 4))
    coeffs[-1, -1] = 1.0
    out = idct2(coeffs).values
    np.testing.assert_allclose(out, idct2_direct(coeffs), atol=1e-12)
    # alternating sign along both axes
    assert np.all(np.sign(out[:, :-1]) == -np.sign(out[:, 1:]))


@settings(max_examples=100, deadline=None)
@given(small_images)
def test_parseval(img):
    e_img = float(np.sum(img ** 2))
    e_c = dct2(img).energy()
    assert abs(e_c - e_img) <= 1e-6 * max(e_img, 1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(n, m, a, b, seed):
    g = np.random.default_rng(seed)
    x, y = g.normal(size=(n, m)), g.normal(size=(n, m))
    np.testing.assert_allclose(dct2(a * x + b * y).coeffs,
                               a * dct2(x).coeffs + b * dct2(y).coeffs, atol=1e-5)


def test_mask_extremes():
    assert build_frequency_mask(5, 7, 1.0).keep.all()
    assert not build_frequency_mask(5, 7, 0.0).keep.any()


def test_mask_2x2_radial_tie_break():
    keep = build_frequency_mask(2, 2, 0.5, "radial").keep
    assert keep.tolist() == [[True, True], [False, False]]


def test_ranking_keys_by_enumeration():
    n, m = 3, 5
    for ordering, key in (("radial", lambda i, j: (i / n) ** 2 + (j / m) ** 2),
                          ("diagonal", lambda i, j: i / n + j / m)):
        pairs = sorted(((key(i, j), i, j) for i in range(n) for j in range(m)),
                       key=lambda t: (round(t[0], 12), t[1], t[2]))
        expected = [i * m + j for _, i, j in pairs]
        assert frequency_ranking(n, m, ordering).tolist() == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(0, 1),
       st.sampled_from(["radial", "diagonal"]))
def test_mask_invariants(n, m, frac, ordering):
    mask = build_frequency_mask(n, m, frac, ordering)
    assert mask.kept_count == round(frac * n * m)
    if mask.kept_count:
        assert mask.keep[0, 0]
    # downward closed: a kept coefficient has all lower-ranked ones kept
    order = frequency_ranking(n, m, ordering)
    flags = mask.keep.ravel()[order]
    assert not np.any(~flags[:-1] & flags[1:])
    i, j = np.nonzero(mask.keep)
    if i.size:
        # radial/diagonal keys are monotone in each index, so kept sets are staircase shaped
        for a, b in zip(i, j):
            assert mask.keep[:a + 1, :b + 1].all()


def test_unknown_ordering():
    with pytest.raises(ValueError):
        build_frequency_mask(4, 4, 0.5, "spiral")


def test_identity_mask(rng):
    img = ImageGrid(rng.normal(size=(16, 12)))
    out = lowpass_filter(img, build_frequency_mask(16, 12, 1.0))
    np.testing.assert_allclose(out.values, img.values, atol=1e-4)


def test_constant_image_survives_filter():
    img = ImageGrid(np.full((20, 30), 0.25), (-1, 1))
    for frac in (0.01, 0.5, 0.9):
        np.testing.assert_allclose(dct_filter(img, frac).values, 0.25, atol=1e-4)


def test_checkerboard_is_removed():
    n, a = 256, 0.1
    board = (np.indices((n, n)).sum(0) % 2) * 2 - 1.0
    c = dct2(board).coeffs
    # the alternating pattern peaks at the highest-frequency coefficient
    assert np.unravel_index(np.argmax(np.abs(c)), c.shape) == (n - 1, n - 1)
    assert not build_frequency_mask(n, n, 0.5).keep[-1, -1]
    # most, though not all, of its energy lies in the zeroed half
    kept = build_frequency_mask(n, n, 0.5).keep
    assert np.sum(c[kept] ** 2) < 0.01 * np.sum(c ** 2)
    out = dct_filter(ImageGrid(0.5 + a * board), 0.5)
    assert np.sqrt(np.mean((out.values - 0.5) ** 2)) < 0.01 * a


@pytest.mark.parametrize("ordering", ["radial", "diagonal"])
def test_filter_zeroes_masked_coefficients(rng, ordering):
    img = ImageGrid(rng.normal(size=(32, 24)))
    mask = build_frequency_mask(32, 24, 0.5, ordering)
    out = lowpass_filter(img, mask)
    c = dct2(out).coeffs
    assert np.max(np.abs(c[~mask.keep])) < 1e-6
    assert dct2(out).energy() <= dct2(img).energy() + 1e-9


def test_filter_is_idempotent(rng):
    img = ImageGrid(rng.normal(size=(40, 40)))
    mask = build_frequency_mask(40, 40, 0.3)
    once = lowpass_filter(img, mask)
    np.testing.assert_allclose(lowpass_filter(once, mask).values, once.values, atol=1e-4)


def test_filter_shape_mismatch():
    with pytest.raises(ValueError):
        lowpass_filter(ImageGrid(np.zeros((4, 4))), build_frequency_mask(4, 5, 0.5))


def test_noise_zero_sigma_is_identity(rng):
    img = ImageGrid(rng.normal(size=(8, 8)))
    assert inject_gaussian_noise(img, 0.0, 1) == img


def test_noise_is_seeded():
    img = ImageGrid(np.zeros((16, 16)), (-1, 1))
    assert inject_gaussian_noise(img, 0.3, 5) == inject_gaussian_noise(img, 0.3, 5)


def test_noise_level_and_range():
    img = ImageGrid(np.zeros((256, 256)), (-1, 1))
    out = inject_gaussian_noise(img, 0.1, 11)
    # std of the sample std over 65536 draws is ~0.1/sqrt(2*65536) = 2.8e-4
    assert abs(out.values.std() - 0.1) < 0.005
    big = inject_gaussian_noise(img, 2.0, 11)
    assert big.value_range[0] < -1 and big.value_range[1] > 1


def test_noise_negative_sigma():
    with pytest.raises(ValueError):
        inject_gaussian_noise(ImageGrid(np.zeros((2, 2))), -0.1)


def test_coeffs_remember_source_range():
    img = ImageGrid(np.full((3, 3), 0.5), (0, 1))
    c = dct2(img)
    assert isinstance(c, DctCoeffs) and c.source_range == (0, 1)
    assert idct2(c).value_range == (0, 1)


def test_mask_png_export(tmp_path):
    mask = build_frequency_mask(6, 6, 0.5)
    save_frequency_mask(mask, tmp_path / "m.png")
    arr = np.asarray(Image.open(tmp_path / "m.png"))
    assert arr.dtype == np.uint8
    np.testing.assert_array_equal(arr == 255, mask.keep)
