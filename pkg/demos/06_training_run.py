"""A short end-to-end training run with validation overlays.

Run: python demos/06_training_run.py        (about a minute on CPU)
Artifacts: demo_output/train/.
"""

import os

import numpy as np

from ivusgan.nets import DiscriminatorConfig, GeneratorConfig, forward_generator
from ivusgan.phantom import PhantomSpec, make_dataset
from ivusgan.rng import Rng
from ivusgan.segment import lu_ma_boundaries, predict_labels
from ivusgan.svg import overlay_svg
from ivusgan.tensor import Tensor
from ivusgan.train import TrainConfig, history_to_csv, train

out = "demo_output/train"
os.makedirs(out, exist_ok=True)

ds = make_dataset(PhantomSpec(seed=0), 16, 4, 4)
tc = TrainConfig(epochs=25, batch_size=4, seed=0, eval_every=5)
print(f"training UNet on {len(ds.train)} phantoms for {tc.epochs} epochs...")
result = train(
    GeneratorConfig(), DiscriminatorConfig(), tc, ds,
    progress=lambda r: print(
        f"  epoch {r.epoch:2d}: d={r.d_loss:.3f} adv={r.g_adv:.3f} "
        f"rec={r.g_rec:.4f} val lu_jm={r.val.lu_jm:.3f}"
    ) if r.epoch % 5 == 0 or r.epoch == 1 else None,
)
history_to_csv(result.history, os.path.join(out, "history.csv"))

u = Tensor(np.stack([s.condition_image.data for s in ds.val]))
pred, _ = forward_generator(result.generator, u, Rng(9), mode="eval_batch")
for i, sample in enumerate(ds.val):
    labels = predict_labels(pred.data[i])
    img01 = (sample.condition_image.data[0].astype(np.float64) + 1.0) / 2.0
    contours = [(sample.lu_contour, "#2ecc71"), (sample.ma_contour, "#27ae60")]
    try:
        plu, pma = lu_ma_boundaries(labels)
        contours += [(plu, "#e74c3c"), (pma, "#c0392b")]
    except Exception as exc:
        print(f"  val sample {sample.index}: no prediction boundary ({exc})")
    with open(os.path.join(out, f"val_{sample.index:04d}.svg"), "w") as fh:
        fh.write(overlay_svg(img01, contours))

print(f"history: {out}/history.csv")
print(f"overlays (truth green, prediction red): {out}/val_*.svg")
