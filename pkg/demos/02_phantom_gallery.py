"""Generate a phantom gallery: overlays, dataset files, profile lines.

Run: python demos/02_phantom_gallery.py
Artifacts land in demo_output/phantoms/.
"""

import os

import numpy as np

from ivusgan.phantom import PhantomSpec, generate_phantom, make_dataset, profile_line, save_dataset
from ivusgan.svg import overlay_svg

out = "demo_output/phantoms"
os.makedirs(out, exist_ok=True)

spec = PhantomSpec(seed=7, calcification_probability=0.5)
print(f"spec: {spec}")

for idx in range(4):
    s = generate_phantom(spec, idx)
    img01 = (s.condition_image.data[0].astype(np.float64) + 1.0) / 2.0
    svg = overlay_svg(img01, [(s.lu_contour, "#2ecc71"), (s.ma_contour, "#e67e22")])
    path = os.path.join(out, f"phantom_{idx}.svg")
    with open(path, "w") as fh:
        fh.write(svg)
    areas = {c: int((s.label_map == i).sum()) for i, c in enumerate(("lumen", "plaque", "tissue"))}
    calc = "yes" if s.geometry.calcification else "no"
    print(f"sample {idx}: areas {areas}, calcification {calc} -> {path}")

print("\n== radial profile line through sample 0 (intensities along a ray) ==")
s = generate_phantom(PhantomSpec(seed=7, speckle_contrast=0.0), 0)
prof = profile_line(s.condition_image, s.geometry.center, 0.6, 32)
lu_r = float(s.geometry.lu_radius(0.6))
ma_r = float(s.geometry.ma_radius(0.6))
print(f"analytic boundary radii along the ray: lumen {lu_r:.1f} px, outer {ma_r:.1f} px")
bar = "".join("#" if v > 0 else ("+" if v > -0.5 else ".") for v in prof)
print(f"profile ({len(prof)} samples, . lumen / + tissue / # plaque): {bar}")

print("\n== dataset on disk ==")
ds = make_dataset(PhantomSpec(seed=1), 4, 2, 2)
manifest = save_dataset(ds, os.path.join(out, "dataset"))
print(f"wrote {len(manifest['files'])} samples under {out}/dataset "
      f"(PGM images + label maps, contour vertex files, manifest.json)")
