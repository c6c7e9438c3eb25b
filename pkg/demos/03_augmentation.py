"""Rotation/scaling augmentation keeps ground truth exact.

Run: python demos/03_augmentation.py
"""

import os

import numpy as np

from ivusgan.augment import augment_dataset, rotate_sample, scale_sample
from ivusgan.phantom import PhantomSpec, generate_phantom
from ivusgan.svg import overlay_svg

out = "demo_output/augment"
os.makedirs(out, exist_ok=True)


def area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


s = generate_phantom(PhantomSpec(seed=3), 0)
print(f"base lumen contour area: {area(s.lu_contour):.2f} px^2")

for angle in (37.0, 90.0, 203.5):
    r = rotate_sample(s, angle)
    img01 = (r.condition_image.data[0].astype(np.float64) + 1.0) / 2.0
    with open(os.path.join(out, f"rot_{int(angle * 10)}.svg"), "w") as fh:
        fh.write(overlay_svg(img01, [(r.lu_contour, "#2ecc71"), (r.ma_contour, "#e67e22")]))
    print(f"rotate {angle:6.1f} deg: contour area {area(r.lu_contour):.2f} "
          f"(analytic transform, exactly preserved)")

for f in (0.8, 1.25):
    sc = scale_sample(s, f)
    print(f"scale x{f}: lumen area {area(sc.lu_contour):.2f} "
          f"(= {f}^2 * base = {f * f * area(s.lu_contour):.2f})")

quarter = rotate_sample(rotate_sample(rotate_sample(rotate_sample(s, 90), 90), 90), 90)
print(f"four quarter turns identical to original: "
      f"{np.array_equal(quarter.condition_image.data, s.condition_image.data)}")

samples = [generate_phantom(PhantomSpec(seed=3), i) for i in range(3)]
expanded = augment_dataset(samples, n_rotations=3, scale_factors=[0.9, 1.1], seed=5)
print(f"augment_dataset: {len(samples)} samples -> {len(expanded)} "
      f"(1 original + 3 rotations + 2 scales each)")
