"""Oracle self-checks exposed through ``ivusgan selftest``.

Each check returns (name, passed, detail).  The pytest acceptance module
runs the same functions; the CLI prints one PASS/FAIL line per check and
exits 3 on any failure.  Tolerances are fixed here, not configurable.
"""

from __future__ import annotations

import math

import numpy as np

import ivusgan.tensor as T
from .gradcheck import check_gradients
from .metrics import avg_distance, hausdorff, jaccard, pad, resample_contour
from .nets import (
    GeneratorConfig,
    analytic_generator_params,
    build_generator,
    forward_generator,
    param_count,
)
from .nn_ops import (
    batch_norm,
    conv2d,
    conv2d_transpose,
    dropout,
    leaky_relu,
    relu,
    sigmoid_act,
    tanh_act,
)
from .phantom import PhantomSpec, generate_phantom
from .rng import Rng
from .segment import cleanup, extract_contour, lu_ma_boundaries
from .tensor import Tensor, backward
from .train import Adam

GRAD_TOL = 1e-5
ADJOINT_TOL = 1e-10
ADAM_TOL = 1e-12


def _t(rng, shape, shift=0.0, scale=1.0):
    return Tensor(rng.normal(shape) * scale + shift, requires_grad=True, dtype=np.float64)


def check_op_gradients():
    """Criterion: every differentiable op passes central finite differences."""
    worst = {}
    rng = Rng(2024)

    x = _t(rng.split("e1"), (2, 3), shift=0.3)
    y = _t(rng.split("e2"), (2, 3), shift=2.5, scale=0.4)
    cases = {
        "add": lambda: T.mean(T.add(x, y)),
        "sub": lambda: T.mean(T.sub(x, y)),
        "mul": lambda: T.mean(T.mul(x, y)),
        "abs": lambda: T.mean(T.abs_(y)),
        "square": lambda: T.mean(T.square_(x)),
        "log": lambda: T.mean(T.log_(y)),
        "mean": lambda: T.mean(x),
        "sum": lambda: T.sum_(T.mul(x, x)),
        "concat": lambda: T.mean(T.square_(T.concat(x, y, axis=1))),
        "leaky_relu": lambda: T.mean(leaky_relu(x, 0.2)),
        "relu": lambda: T.mean(relu(x)),
        "tanh": lambda: T.mean(tanh_act(x)),
        "sigmoid": lambda: T.mean(sigmoid_act(x)),
        "dropout": lambda: T.mean(dropout(x, 0.3, Rng(7))),
    }
    for name, f in cases.items():
        worst[name] = check_gradients(f, [x, y], h=1e-6)

    cx = _t(rng.split("cx"), (1, 2, 5, 5))
    cw = _t(rng.split("cw"), (3, 2, 3, 3))
    cb = _t(rng.split("cb"), (3,))
    coef = Tensor(rng.split("cc").normal((1, 3, 3, 3)), dtype=np.float64)
    worst["conv2d"] = check_gradients(
        lambda: T.sum_(T.mul(conv2d(cx, cw, cb, stride=2, padding=1), coef)), [cx, cw, cb], h=1e-6
    )
    tx = _t(rng.split("tx"), (1, 3, 3, 3))
    tw = _t(rng.split("tw"), (3, 2, 4, 4))
    tb = _t(rng.split("tb"), (2,))
    tcoef = Tensor(rng.split("tc").normal((1, 2, 6, 6)), dtype=np.float64)
    worst["conv2d_transpose"] = check_gradients(
        lambda: T.sum_(T.mul(conv2d_transpose(tx, tw, tb, stride=2, padding=1), tcoef)),
        [tx, tw, tb], h=1e-6,
    )
    bx = _t(rng.split("bx"), (2, 2, 3, 3))
    bg = _t(rng.split("bg"), (2,), shift=1.0, scale=0.1)
    bb = _t(rng.split("bb"), (2,))
    bcoef = Tensor(rng.split("bc").normal((2, 2, 3, 3)), dtype=np.float64)
    rm, rv = rng.split("rm").normal(2), 1.0 + 0.5 * rng.split("rv").uniform(2)
    for mode in ("train", "eval"):
        worst[f"batch_norm_{mode}"] = check_gradients(
            lambda: T.sum_(T.mul(
                batch_norm(bx, bg, bb, rm.copy(), rv.copy(), mode=mode), bcoef)),
            [bx, bg, bb], h=1e-6,
        )

    bad = {k: v for k, v in worst.items() if v >= GRAD_TOL}
    detail = f"max rel err {max(worst.values()):.2e} over {len(worst)} ops"
    if bad:
        detail += f"; FAILING: {bad}"
    return "op_gradients", not bad, detail


def check_generator_gradients(max_coords_per_param: int = 12):
    """Criterion: each full generator variant passes finite differences.

    Every parameter tensor is checked; large tensors on a deterministic
    random subset of ``max_coords_per_param`` coordinates to keep the suite
    inside its runtime budget.
    """
    worst = {}
    configs = [
        GeneratorConfig("unet", image_size=8, depth=2, base_channels=2),
        GeneratorConfig("encoder_decoder", image_size=8, depth=2, base_channels=2),
        GeneratorConfig("hourglass", image_size=8, depth=2, base_channels=2, n_stacks=1),
        GeneratorConfig("hourglass_reinject", image_size=8, depth=2, base_channels=2, n_stacks=2),
    ]
    for cfg in configs:
        net = build_generator(cfg, Rng(5), dtype=np.float64)
        u = Tensor(Rng(6).normal((1, 1, 8, 8)), dtype=np.float64)
        coef = Tensor(Rng(7).normal((1, 3, 8, 8)), dtype=np.float64)

        def make_loss():
            pred, _ = forward_generator(net, u, Rng(8), mode="train")
            return T.mean(T.mul(T.square_(pred), coef))

        params = [p for _, p in net.named_parameters()]
        loss = make_loss()
        for p in params:
            p.zero_grad()
        backward(loss)
        analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

        def eval_loss():
            return float(make_loss().item())

        err = 0.0
        for pi, (p, a) in enumerate(zip(params, analytic)):
            flat = p.data.reshape(-1)
            n = flat.size
            if n <= max_coords_per_param:
                coords = range(n)
            else:
                coords = sorted(
                    set(int(c) for c in Rng(11).split(cfg.variant, pi).integers(0, n, max_coords_per_param))
                )
            for ci in coords:
                orig = flat[ci]
                step = 1e-6 * max(1.0, abs(float(orig)))
                flat[ci] = orig + step
                fp = eval_loss()
                flat[ci] = orig - step
                fm = eval_loss()
                flat[ci] = orig
                num = (fp - fm) / (2.0 * step)
                ana = float(a.reshape(-1)[ci])
                err = max(err, abs(ana - num) / max(1.0, abs(ana), abs(num)))
        worst[cfg.variant] = err

    bad = {k: v for k, v in worst.items() if v >= GRAD_TOL}
    detail = "; ".join(f"{k}: {v:.2e}" for k, v in worst.items())
    return "generator_gradients", not bad, detail


def check_adjoint_identity(n_cases: int = 20):
    """Criterion: conv/transpose inner-product identity to 1e-10 (64-bit)."""
    rng = Rng(71)
    worst = 0.0
    for i in range(n_cases):
        r = rng.split("case", i)
        cin, cout = int(r.integers(1, 4)), int(r.integers(1, 4))
        k, s = int(r.integers(1, 5)), int(r.integers(1, 4))
        p = int(r.integers(0, min(k, 3)))
        ho, wo = int(r.integers(2, 6)), int(r.integers(2, 6))
        h, wd = (ho - 1) * s + k - 2 * p, (wo - 1) * s + k - 2 * p
        if h < 1 or wd < 1:
            p, h, wd = 0, (ho - 1) * s + k, (wo - 1) * s + k
        x = Tensor(r.split("x").normal((2, cin, h, wd)), dtype=np.float64)
        w = Tensor(r.split("w").normal((cout, cin, k, k)), dtype=np.float64)
        yv = conv2d(x, w, stride=s, padding=p)
        y = Tensor(r.split("y").normal(yv.shape), dtype=np.float64)
        lhs = float(np.sum(yv.data * y.data))
        rhs = float(np.sum(x.data * conv2d_transpose(y, w, stride=s, padding=p).data))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    return "adjoint_identity", worst < ADJOINT_TOL, f"max rel err {worst:.2e} over {n_cases} shapes"


def check_metric_oracles(n_masks: int = 1000, n_contours: int = 100):
    """Criterion: jaccard/pad exact vs set enumeration; HD/AD exact vs brute force."""
    rng = Rng(9)
    for i in range(n_masks):
        r = rng.split("mask", i)
        a = r.uniform((16, 16)) < float(r.split("pa").uniform())
        b = r.uniform((16, 16)) < float(r.split("pb").uniform())
        inter = int(np.logical_and(a, b).sum())
        union = int(np.logical_or(a, b).sum())
        want_jm = 1.0 if union == 0 else inter / union
        if jaccard(a, b) != want_jm:
            return "metric_oracles", False, f"jaccard mismatch on mask pair {i}"
        if b.any():
            want_pad = abs(int(a.sum()) - int(b.sum())) / int(b.sum()) * 100.0
            if pad(a, b) != want_pad:
                return "metric_oracles", False, f"pad mismatch on mask pair {i}"

    for i in range(n_contours):
        r = rng.split("contour", i)
        a = _star_polygon(r.split("a"))
        b = _star_polygon(r.split("b"))
        pa, pb = resample_contour(a), resample_contour(b)
        mins_ab = np.array(
            [min(math.sqrt((axp - bxp) * (axp - bxp) + (ayp - byp) * (ayp - byp))
                 for bxp, byp in pb) for axp, ayp in pa]
        )
        mins_ba = np.array(
            [min(math.sqrt((axp - bxp) * (axp - bxp) + (ayp - byp) * (ayp - byp))
                 for axp, ayp in pa) for bxp, byp in pb]
        )
        hd_o = max(mins_ab.max(), mins_ba.max())
        ad_o = (mins_ab.sum() + mins_ba.sum()) / (len(mins_ab) + len(mins_ba))
        hd_v, ad_v = hausdorff(a, b), avg_distance(a, b)
        if hd_v != hd_o:
            return "metric_oracles", False, f"hausdorff mismatch on pair {i}: {hd_v} vs {hd_o}"
        if ad_v != ad_o:
            return "metric_oracles", False, f"avg_distance mismatch on pair {i}: {ad_v} vs {ad_o}"
        if not ad_v <= hd_v:
            return "metric_oracles", False, f"ad > hd on pair {i}"
    return "metric_oracles", True, f"{n_masks} mask pairs exact, {n_contours} contour pairs exact, ad<=hd"


def _star_polygon(rng, r_base=5.0):
    n = int(rng.integers(12, 40))
    theta = 2 * np.pi * np.arange(n) / n
    r = r_base * (1.0 + 0.25 * (2 * rng.uniform(n) - 1))
    cx, cy = 10 * rng.uniform(2)
    return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)


def check_geometry():
    """Criterion: disc areas within 3%; 90-degree rotation consistency exact."""
    details = []
    for radius in (5, 10, 20):
        n = 2 * radius + 7
        yy, xx = np.mgrid[0:n, 0:n]
        mask = np.hypot(xx - n // 2, yy - n // 2) <= radius
        poly = extract_contour(cleanup(mask))
        x, yv = poly[:, 0], poly[:, 1]
        area = 0.5 * float(np.dot(x, np.roll(yv, -1)) - np.dot(np.roll(x, -1), yv))
        rel = abs(area - np.pi * radius ** 2) / (np.pi * radius ** 2)
        details.append(f"r={radius}: {rel * 100:.2f}%")
        if rel >= 0.03:
            return "geometry", False, f"disc r={radius} area off by {rel * 100:.2f}%"
    n = 14
    m = cleanup(Rng(15).uniform((n, n)) < 0.5)
    poly = extract_contour(m)
    rot = extract_contour(np.rot90(m))
    mapped = {(p[1], (n - 1) - p[0]) for p in poly}
    if mapped != {tuple(p) for p in rot}:
        return "geometry", False, "rotation consistency violated"
    return "geometry", True, "; ".join(details) + "; rotation exact"


def check_closed_loop(n_samples: int = 50):
    """Criterion: truth labels -> boundaries -> HD <= 1 px, JM = 1, PAD = 0."""
    spec = PhantomSpec(seed=77)
    worst = 0.0
    for i in range(n_samples):
        s = generate_phantom(spec, i)
        lu, ma = lu_ma_boundaries(s.label_map)
        hd_lu = hausdorff(lu, s.lu_contour)
        hd_ma = hausdorff(ma, s.ma_contour)
        worst = max(worst, hd_lu, hd_ma)
        if hd_lu > 1.0 or hd_ma > 1.0:
            return "closed_loop_truth", False, f"sample {i}: HD {max(hd_lu, hd_ma):.3f} px > 1"
        lum = s.label_map == 0
        inner = s.label_map <= 1
        if jaccard(lum, lum) != 1.0 or pad(inner, inner) != 0.0:
            return "closed_loop_truth", False, f"sample {i}: degenerate JM/PAD"
    return "closed_loop_truth", True, f"{n_samples} samples, worst HD {worst:.3f} px"


def check_param_counts():
    """Criterion: enumerated == closed form on a 3x3 grid; E-D < UNet everywhere."""
    grid = [(2, 2), (2, 4), (2, 8), (3, 2), (3, 4), (3, 8), (4, 2), (4, 4), (4, 8)]
    for depth, base in grid:
        per_variant = {}
        for variant in ("unet", "encoder_decoder", "hourglass", "hourglass_reinject"):
            cfg = GeneratorConfig(variant, image_size=16, depth=depth, base_channels=base)
            built = param_count(build_generator(cfg, Rng(1)))
            formula = analytic_generator_params(cfg)
            if built != formula:
                return (
                    "param_counts", False,
                    f"{variant} depth={depth} base={base}: built {built} != formula {formula}",
                )
            per_variant[variant] = built
        if not per_variant["encoder_decoder"] < per_variant["unet"]:
            return (
                "param_counts", False,
                f"E-D !< UNet at depth={depth} base={base}: {per_variant}",
            )
    return "param_counts", True, f"{len(grid)} grid points x 4 variants match closed forms"


def check_adam_oracle():
    """Criterion: one Adam step matches the hand-computed update to 1e-12."""
    p = Tensor(np.array([0.4, -2.0]), requires_grad=True, dtype=np.float64)
    lr, b1, b2, eps = 0.002, 0.5, 0.999, 1e-8
    opt = Adam([p], lr=lr, beta1=b1, beta2=b2, eps=eps)
    opt.zero_grad()
    target = Tensor(np.array([1.0, 1.0]), dtype=np.float64)
    backward(T.mean(T.square_(p - target)))
    g = p.grad.copy()
    opt.step()
    worst = 0.0
    for pi, gi, got in zip([0.4, -2.0], g.tolist(), p.data.tolist()):
        m = (1 - b1) * gi
        v = (1 - b2) * gi * gi
        want = pi - lr * (m / (1 - b1)) / (math.sqrt(v / (1 - b2)) + eps)
        worst = max(worst, abs(got - want))
    return "adam_oracle", worst < ADAM_TOL, f"max abs err {worst:.2e}"


ALL_CHECKS = (
    check_op_gradients,
    check_generator_gradients,
    check_adjoint_identity,
    check_metric_oracles,
    check_geometry,
    check_closed_loop,
    check_param_counts,
    check_adam_oracle,
)


def run_selftest(report=print):
    """Run every oracle suite; returns True when all pass."""
    ok = True
    for fn in ALL_CHECKS:
        name, passed, detail = fn()
        ok = ok and passed
        report(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ok
