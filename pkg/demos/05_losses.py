"""Loss behaviour: adversarial terms, reconstruction modes, weighting.

Run: python demos/05_losses.py
"""

import math

import numpy as np

from ivusgan.losses import LossWeights, combined_g_loss, d_loss, g_adv_loss, l1_loss, l2_loss
from ivusgan.rng import Rng
from ivusgan.tensor import Tensor


def grid(v):
    return Tensor(np.full((1, 1, 4, 4), v), dtype=np.float64)


print("== adversarial terms over discriminator confidence ==")
print(f"{'S(fake)':>8s} {'d_loss(0.5, s)':>15s} {'g_adv(s)':>10s}")
for s in (0.05, 0.25, 0.5, 0.75, 0.95):
    print(f"{s:8.2f} {d_loss(grid(0.5), grid(s)).item():15.4f} "
          f"{g_adv_loss(grid(s)).item():10.4f}")
print(f"(at s = 0.5 the discriminator loss is 2 ln 2 = {2 * math.log(2):.4f})")

print("\n== reconstruction modes on the same residuals ==")
v = Tensor(Rng(1).normal((3, 16, 16)), dtype=np.float64)
for scale in (0.2, 1.0, 3.0):
    vh = Tensor(v.data + scale * Rng(2).normal(v.shape), dtype=np.float64)
    print(f"residual scale {scale:.1f}: L1 = {l1_loss(v, vh).item():.4f}, "
          f"L2 = {l2_loss(v, vh).item():.4f}  "
          f"({'L2 < L1' if l2_loss(v, vh).item() < l1_loss(v, vh).item() else 'L2 > L1'})")
print("(L2 is below L1 for sub-unit residuals and above for large ones)")

print("\n== combined generator objective across the ablation settings ==")
s_fake = grid(0.4)
vh = Tensor(v.data + 0.3 * Rng(3).normal(v.shape), dtype=np.float64)
settings = {
    "adv_only": LossWeights(a=1.0, b=0.0),
    "l1_only": LossWeights(a=0.0, b=100.0, rec_mode="L1"),
    "l2_only": LossWeights(a=0.0, b=100.0, rec_mode="L2"),
    "adv_l1": LossWeights(a=1.0, b=100.0, rec_mode="L1"),
    "adv_l2": LossWeights(a=1.0, b=100.0, rec_mode="L2"),
}
for name, w in settings.items():
    total = combined_g_loss(s_fake, v, vh, [], w)
    print(f"{name:10s} (a={w.a:5.1f}, b={w.b:5.1f}, {w.rec_mode:2s}): total = {total.item():9.4f}")

print("\n== hourglass intermediate supervision ==")
inters = [Tensor(v.data + 0.5 * Rng(k).normal(v.shape), dtype=np.float64) for k in (4, 5)]
w = LossWeights(a=1.0, b=100.0, rec_mode="L1")
with_inters = combined_g_loss(s_fake, v, vh, inters, w).item()
without = combined_g_loss(s_fake, v, vh, [], w).item()
print(f"final-only loss {without:.4f}; with 2 stack predictions at b/2 each: {with_inters:.4f}")
