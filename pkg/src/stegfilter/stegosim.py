"""Closed-form stand-in for the hidden high-frequency channel of a CycleGAN.

A binary payload is pooled to P x P bits and written into the P**2
highest-frequency DCT coefficients of a carrier as ``+eps`` (bit 1) or
``-eps`` (bit 0). Reading the signs back recovers the payload exactly, while
a DCT low-pass filter that zeroes the band wipes the channel out.

Before embedding, bits are XOR-ed with a keyed pseudo-random sequence
(``StegoConfig.key``). This keeps the bit-error ratio of a destroyed channel
near 0.5 regardless of how sparse the payload is; set ``key=None`` to embed
raw bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dct import DctCoeffs, dct2, frequency_ranking, idct2, lowpass_filter
from .imagecore import BinaryMask, ImageGrid

__all__ = [
    "StegoConfig",
    "StegoReport",
    "downsample_payload",
    "band_indices",
    "embed",
    "extract",
    "bit_error_ratio",
    "psnr",
    "stego_report",
]


@dataclass(frozen=True)
class StegoConfig:
    """Embedding parameters.

    Attributes
    ----------
    payload_side : int
        The payload is pooled to ``payload_side x payload_side`` bits.
    amplitude : float
        Magnitude ``eps`` written into each band coefficient.
    band_fraction : float
        Fraction of all coefficients (highest frequencies first) reserved for
        embedding; the payload must fit inside it.
    key : int or None
        Seed of the bit-whitening sequence; None disables whitening.
    """

    payload_side: int = 16
    amplitude: float = 0.01
    band_fraction: float = 0.5
    key: int | None = 0

    def __post_init__(self):
        if self.payload_side < 1:
            raise ValueError("payload_side must be at least 1")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not 0 < self.band_fraction <= 0.5:
            raise ValueError("band_fraction must lie in (0, 0.5]")

    @property
    def n_bits(self):
        return self.payload_side ** 2

    def check_capacity(self, shape):
        band = int(self.band_fraction * shape[0] * shape[1])
        if self.n_bits > band:
            raise ValueError(
                f"payload of {self.n_bits} bits does not fit into an embedding band "
                f"of {band} coefficients for a {shape[0]}x{shape[1]} image"
            )


@dataclass(frozen=True)
class StegoReport:
    psnr_carrier_vs_stego: float
    ber_prefilter: float
    ber_postfilter: float

    def to_text(self):
        return "\n".join(f"{k}\t{v:.6g}" for k, v in vars(self).items()) + "\n"


def _block_edges(n, p):
    starts = (np.arange(p) * n) // p
    stops = np.maximum(((np.arange(p) + 1) * n) // p, starts + 1)
    return starts, stops


def downsample_payload(payload, side):
    """Majority-pool a binary mask to ``side x side`` bits.

    A block becomes 1 when at least half of its pixels are foreground.
    Images smaller than `side` are upsampled by nearest-neighbour.
    """
    vals = payload.values if isinstance(payload, BinaryMask) else np.asarray(payload, bool)
    rs, re = _block_edges(vals.shape[0], side)
    cs, ce = _block_edges(vals.shape[1], side)
    out = np.empty((side, side), dtype=bool)
    for a in range(side):
        for b in range(side):
            out[a, b] = vals[rs[a]:re[a], cs[b]:ce[b]].mean() >= 0.5
    return BinaryMask(out)


def band_indices(shape, n_bits):
    """Flat indices of the `n_bits` highest radial frequencies, highest first."""
    order = frequency_ranking(shape[0], shape[1], "radial")
    return order[::-1][:n_bits]


def _whitening(cfg):
    if cfg.key is None:
        return np.zeros(cfg.n_bits, dtype=bool)
    return np.random.default_rng(cfg.key).integers(0, 2, cfg.n_bits).astype(bool)


def embed(carrier, payload, cfg=StegoConfig()):
    """Hide `payload` in the highest frequencies of `carrier`.

    The carrier must be normalized to ``[-1, 1]``. The returned image keeps
    that declared range unless the embedding pushes values outside it.
    """
    if carrier.value_range != (-1.0, 1.0):
        raise ValueError(f"carrier must have declared range (-1, 1), got {carrier.value_range}")
    cfg.check_capacity(carrier.shape)
    bits = downsample_payload(payload, cfg.payload_side).values.ravel() ^ _whitening(cfg)
    c = dct2(carrier)
    coeffs = np.array(c.coeffs)
    flat = coeffs.reshape(-1)
    flat[band_indices(carrier.shape, cfg.n_bits)] = np.where(bits, cfg.amplitude, -cfg.amplitude)
    return idct2(DctCoeffs(coeffs, c.source_range))


def extract(stego, cfg=StegoConfig()):
    """Read the payload back from the signs of the band coefficients.

    A coefficient decodes as 1 iff it is strictly positive, so exact zeros
    decode as 0 (before un-whitening).
    """
    cfg.check_capacity(stego.shape)
    flat = dct2(stego).coeffs.reshape(-1)
    bits = flat[band_indices(stego.shape, cfg.n_bits)] > 0
    bits ^= _whitening(cfg)
    return BinaryMask(bits.reshape(cfg.payload_side, cfg.payload_side))


def bit_error_ratio(a, b):
    a = a.values if isinstance(a, BinaryMask) else np.asarray(a, bool)
    b = b.values if isinstance(b, BinaryMask) else np.asarray(b, bool)
    if a.shape != b.shape:
        raise ValueError(f"bit arrays differ in shape: {a.shape} vs {b.shape}")
    return float(np.mean(a != b))


def psnr(reference, test, peak=None):
    """Peak signal-to-noise ratio in dB.

    `peak` defaults to the width of the reference's declared range (2 for
    images in ``[-1, 1]``). Identical images give ``inf``.
    """
    if reference.shape != test.shape:
        raise ValueError("images differ in shape")
    if peak is None:
        lo, hi = reference.value_range
        peak = hi - lo
    mse = float(np.mean((reference.values - test.values) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def stego_report(carrier, payload, cfg, filter_mask):
    """Embed, measure, filter and measure again."""
    truth = downsample_payload(payload, cfg.payload_side)
    stego = embed(carrier, payload, cfg)
    filtered = lowpass_filter(stego, filter_mask)
    return StegoReport(
        psnr_carrier_vs_stego=psnr(carrier, stego),
        ber_prefilter=bit_error_ratio(truth, extract(stego, cfg)),
        ber_postfilter=bit_error_ratio(truth, extract(filtered, cfg)),
    )
