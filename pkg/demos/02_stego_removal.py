"""Hide a mask in an image's highest frequencies, then filter it away.

The embedding changes each high-band coefficient by a tiny amount, so the
stego image is visually identical to the carrier. A half-spectrum low-pass
filter wipes the band and the decoded payload drops to chance level.

    python demos/02_stego_removal.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from stegfilter import ImageGrid, build_frequency_mask, lowpass_filter, save_image
from stegfilter.masksynth import load_preset, synthesize_mask
from stegfilter.pipeline import render_carrier
from stegfilter.stegosim import StegoConfig, bit_error_ratio, downsample_payload, embed, extract, psnr, stego_report

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "stego"
out.mkdir(parents=True, exist_ok=True)

preset = load_preset("dsb")
carrier = render_carrier(synthesize_mask(preset, 1), np.random.default_rng(1))
payload = synthesize_mask(preset, 2).foreground
cfg = StegoConfig(payload_side=16, amplitude=0.01)

stego = embed(carrier, payload, cfg)
print(f"psnr carrier vs stego: {psnr(carrier, stego):.1f} dB")

truth = downsample_payload(payload, cfg.payload_side)
print(f"bit errors before filtering: {bit_error_ratio(truth, extract(stego, cfg)):.3f}")

mask = build_frequency_mask(*carrier.shape, 0.5)
filtered = lowpass_filter(stego, mask)
print(f"bit errors after filtering:  {bit_error_ratio(truth, extract(filtered, cfg)):.3f}")

# The same numbers in one call, as the stego-demo subcommand reports them.
print(stego_report(carrier, payload, cfg, mask).to_text(), end="")

for name, img in (("carrier", carrier), ("stego", stego), ("filtered", filtered)):
    save_image(ImageGrid(np.clip(img.values, -1, 1), (-1, 1)), out / f"{name}.png", 16)
save_image(ImageGrid(truth.values.astype(float), (0, 1)), out / "payload_bits.png")
print(f"wrote images to {out}")
