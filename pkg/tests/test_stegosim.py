import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from stegfilter.dct import build_frequency_mask, dct2, dct_filter, lowpass_filter
from stegfilter.imagecore import BinaryMask, ImageGrid
from stegfilter.stegosim import (
    StegoConfig,
    band_indices,
    bit_error_ratio,
    downsample_payload,
    embed,
    extract,
    psnr,
    stego_report,
)


def smooth_carrier(seed, shape=(256, 256), noise=0.02):
    g = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(g.normal(size=shape), 6) * 4
    vals = np.clip(base + g.normal(0, noise, shape), -0.95, 0.95)
    return ImageGrid(vals, (-1, 1))


def random_payload(seed, shape=(256, 256)):
    return BinaryMask(np.random.default_rng(seed).random(shape) < 0.5)


def psnr_closed_form(carrier, payload, cfg):
    """PSNR from the changed band coefficients alone (Parseval)."""
    n, m = carrier.shape
    bits = downsample_payload(payload, cfg.payload_side).values.ravel()
    if cfg.key is not None:
        bits = bits ^ np.random.default_rng(cfg.key).integers(0, 2, bits.size).astype(bool)
    target = np.where(bits, cfg.amplitude, -cfg.amplitude)
    before = dct2(carrier).coeffs.ravel()[band_indices(carrier.shape, cfg.n_bits)]
    mse = np.sum((target - before) ** 2) / (n * m)
    return 10 * math.log10(4.0 / mse)


def test_config_validation():
    with pytest.raises(ValueError):
        StegoConfig(amplitude=0)
    with pytest.raises(ValueError):
        StegoConfig(band_fraction=0.6)
    with pytest.raises(ValueError):
        embed(smooth_carrier(0, (8, 8)), BinaryMask(np.ones((8, 8))), StegoConfig(payload_side=6))


def test_embed_requires_signed_unit_range():
    img = ImageGrid(np.zeros((32, 32)), (0, 255))
    with pytest.raises(ValueError):
        embed(img, BinaryMask(np.ones((32, 32))), StegoConfig(payload_side=4))


def test_downsample_majority():
    p = np.zeros((4, 4), bool)
    p[:2, :2] = True
    p[2, 2] = True  # one of four pixels: below majority
    p[:2, 2:] = [[True, True], [False, False]]  # exactly half
    out = downsample_payload(BinaryMask(p), 2).values
    assert out.tolist() == [[True, True], [False, False]]


def test_downsample_small_payload_upsamples():
    out = downsample_payload(BinaryMask(np.array([[1, 0], [0, 1]])), 4).values
    assert out.shape == (4, 4)
    assert out[0, 0] and out[3, 3] and not out[0, 3]


def test_band_is_highest_frequencies():
    idx = band_indices((8, 8), 4)
    assert idx[0] == 63
    assert not build_frequency_mask(8, 8, 0.5).keep.ravel()[idx].any()


@pytest.mark.parametrize("key", [0, 123, None])
def test_round_trip_exact(key):
    cfg = StegoConfig(key=key)
    for seed in range(5):
        carrier, payload = smooth_carrier(seed), random_payload(seed + 100)
        stego = embed(carrier, payload, cfg)
        assert extract(stego, cfg) == downsample_payload(payload, cfg.payload_side)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.floats(1e-3, 0.5))
def test_round_trip_property(seed, side, eps):
    cfg = StegoConfig(payload_side=side, amplitude=eps)
    g = np.random.default_rng(seed)
    carrier = ImageGrid(g.uniform(-0.9, 0.9, (24, 20)), (-1, 1))
    payload = BinaryMask(g.random((11, 13)) < 0.5)
    assert extract(embed(carrier, payload, cfg), cfg) == downsample_payload(payload, side)


def test_zero_payload_still_changes_carrier():
    carrier = smooth_carrier(3)
    stego = embed(carrier, BinaryMask(np.zeros((256, 256))), StegoConfig(key=None))
    assert not np.array_equal(stego.values, carrier.values)


def test_psnr_matches_closed_form_and_bound():
    cfg = StegoConfig(payload_side=16, amplitude=0.01)
    for seed in range(5):
        carrier, payload = smooth_carrier(seed), random_payload(seed)
        got = psnr(carrier, embed(carrier, payload, cfg))
        assert got == pytest.approx(psnr_closed_form(carrier, payload, cfg), abs=1e-6)
        assert got >= 40.0


def test_psnr_band_limited_carrier_depends_on_epsilon_only():
    n = 256
    expected = 10 * math.log10(4.0 * n * n / (0.01 ** 2 * 256))
    for seed in range(3):
        carrier = dct_filter(smooth_carrier(seed, noise=0.0), 0.5)
        carrier = ImageGrid(carrier.values, (-1, 1))
        got = psnr(carrier, embed(carrier, random_payload(seed), StegoConfig()))
        assert got == pytest.approx(expected, abs=1e-6)


def test_psnr_strictly_decreasing_in_epsilon():
    carrier = ImageGrid(dct_filter(smooth_carrier(9, noise=0.0), 0.5).values, (-1, 1))
    payload = random_payload(9)
    vals = [psnr(carrier, embed(carrier, payload, StegoConfig(amplitude=e)))
            for e in (0.001, 0.005, 0.01, 0.05, 0.1)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_unembedded_carrier_gives_coin_flip_bits():
    cfg = StegoConfig()
    fixed = random_payload(0)
    truth = downsample_payload(fixed, cfg.payload_side)
    bers = [bit_error_ratio(truth, extract(smooth_carrier(s, noise=0.05), cfg)) for s in range(100)]
    assert abs(np.mean(bers) - 0.5) <= 0.05


def test_filter_destroys_channel():
    cfg = StegoConfig()
    mask = build_frequency_mask(256, 256, 0.5)
    band = band_indices((256, 256), cfg.n_bits)
    bers = []
    for seed in range(100):
        carrier, payload = smooth_carrier(seed), random_payload(seed + 1000)
        filtered = lowpass_filter(embed(carrier, payload, cfg), mask)
        assert np.max(np.abs(dct2(filtered).coeffs.ravel()[band])) < 1e-6
        truth = downsample_payload(payload, cfg.payload_side)
        bers.append(bit_error_ratio(truth, extract(filtered, cfg)))
    assert np.mean(bers) >= 0.3


def test_filtering_content_unaffected_by_embedding():
    mask = build_frequency_mask(256, 256, 0.5)
    for seed in range(5):
        carrier = smooth_carrier(seed)
        plain = psnr(carrier, lowpass_filter(carrier, mask))
        stego = psnr(carrier, lowpass_filter(embed(carrier, random_payload(seed)), mask))
        assert plain >= stego - 0.1


def test_report_identity_filter():
    carrier, payload = smooth_carrier(1), random_payload(1)
    rep = stego_report(carrier, payload, StegoConfig(), build_frequency_mask(256, 256, 1.0))
    assert rep.ber_prefilter == 0 and rep.ber_postfilter == 0


def test_report_zero_keep_filter_uses_tie_rule():
    cfg = StegoConfig(key=None)
    carrier, payload = smooth_carrier(2), random_payload(2)
    rep = stego_report(carrier, payload, cfg, build_frequency_mask(256, 256, 0.0))
    # every coefficient is exactly zero, so every bit decodes as 0
    truth = downsample_payload(payload, cfg.payload_side).values
    assert rep.ber_postfilter == pytest.approx(truth.mean())
    zero = lowpass_filter(carrier, build_frequency_mask(256, 256, 0.0))
    assert np.all(zero.values == 0)
    assert not extract(zero, cfg).values.any()


def test_report_default_thresholds():
    carrier, payload = smooth_carrier(4), random_payload(4)
    rep = stego_report(carrier, payload, StegoConfig(), build_frequency_mask(256, 256, 0.5))
    assert rep.psnr_carrier_vs_stego >= 40
    assert rep.ber_prefilter == 0
    assert rep.ber_postfilter >= 0.3
    assert "ber_postfilter" in rep.to_text()


def test_bit_error_ratio_shape_check():
    with pytest.raises(ValueError):
        bit_error_ratio(np.zeros((2, 2)), np.zeros((3, 3)))
