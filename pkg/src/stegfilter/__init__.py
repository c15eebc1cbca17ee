"""DCT low-pass removal of hidden high-frequency signals, with the tooling
around it: synthetic nuclei masks, a steganography simulator, watershed
post-processing and IoU-matched evaluation."""

from .dct import build_frequency_mask, dct2, dct_filter, idct2, lowpass_filter
from .imagecore import BinaryMask, ImageGrid, InstanceMask, load_image, normalize, save_image

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ImageGrid",
    "InstanceMask",
    "build_frequency_mask",
    "dct2",
    "dct_filter",
    "idct2",
    "load_image",
    "lowpass_filter",
    "normalize",
    "save_image",
]
