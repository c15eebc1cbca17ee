"""From a binary mask back to instances, then score them.

    python demos/04_postproc_eval.py
"""

import numpy as np

from stegfilter.evalmetrics import match_instances, prf_scores
from stegfilter.imagecore import BinaryMask, ImageGrid
from stegfilter.masksynth import load_preset, synthesize_mask
from stegfilter.postproc import distance_transform, find_markers, image_to_instances, mask_to_instances

# Two overlapping disks form one connected blob; the distance map has two peaks.
yy, xx = np.indices((30, 40))
blob = ((yy - 15) ** 2 + (xx - 15) ** 2 <= 25) | ((yy - 15) ** 2 + (xx - 24) ** 2 <= 25)
dist = distance_transform(BinaryMask(blob))
print("markers:", find_markers(dist, BinaryMask(blob)).tolist())
print("instances:", mask_to_instances(BinaryMask(blob)).instance_count)

# A whole synthetic mask, thresholded from a signed image.
gt = synthesize_mask(load_preset("bbbc039"), 11, separation=1)
img = ImageGrid(np.where(gt.labels > 0, 0.8, -0.8), (-1, 1))
pred = image_to_instances(img)
print(f"ground truth {gt.instance_count} nuclei, recovered {pred.instance_count}")

for tau in (0.5, 0.75):
    m = match_instances(pred, gt, tau)
    s = prf_scores(m)
    print(f"tau={tau}: tp={m.tp} fp={m.fp} fn={m.fn} "
          f"precision={s.precision:.3f} recall={s.recall:.3f} f1={s.f1:.3f}")

# Blank a quarter of the image: recall falls hard, precision less so
# (only nuclei cut by the blanked edge turn into false positives).
damaged = img.values.copy()
damaged[:, : damaged.shape[1] // 4] = -0.8
m = match_instances(image_to_instances(ImageGrid(damaged, (-1, 1))), gt, 0.5)
s = prf_scores(m)
print(f"damaged: precision={s.precision:.3f} recall={s.recall:.3f}")
