"""Low-pass filtering in the DCT domain.

Builds the default frequency mask, shows how much of a checkerboard survives
it, and checks that a smooth image passes almost untouched.

    python demos/01_dct_filter.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np
from scipy import ndimage

from stegfilter import ImageGrid, build_frequency_mask, dct2, lowpass_filter, save_image
from stegfilter.dct import save_frequency_mask

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "dct"
out.mkdir(parents=True, exist_ok=True)

n = 128
mask = build_frequency_mask(n, n, keep_fraction=0.5, ordering="radial")
print(f"mask keeps {mask.kept_count} of {n * n} coefficients")
save_frequency_mask(mask, out / "mask_radial.png")
save_frequency_mask(build_frequency_mask(n, n, 0.5, "diagonal"), out / "mask_diagonal.png")

# A fine checkerboard lives almost entirely in the discarded half.
board = 0.5 + 0.1 * ((np.indices((n, n)).sum(0) % 2) * 2 - 1.0)
filtered = lowpass_filter(ImageGrid(board), mask)
residual = np.sqrt(np.mean((filtered.values - 0.5) ** 2))
print(f"checkerboard amplitude 0.1, rms after filtering {residual:.5f}")

# Smooth content is mostly low frequency and survives.
smooth = ndimage.gaussian_filter(np.random.default_rng(0).normal(size=(n, n)), 4)
smooth = np.clip(smooth / np.abs(smooth).max(), -1, 1)
img = ImageGrid(smooth, (-1, 1))
kept = lowpass_filter(img, mask)
print(f"smooth image energy kept: {dct2(kept).energy() / dct2(img).energy():.6f}")
print(f"smooth image max change: {np.abs(kept.values - img.values).max():.2e}")

save_image(img, out / "smooth.png")
save_image(ImageGrid(np.clip(filtered.values, 0, 1), (0, 1)), out / "checkerboard_filtered.png")
print(f"wrote images to {out}")
