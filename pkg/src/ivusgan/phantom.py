"""Deterministic synthetic vessel cross-section phantoms.

Each phantom is a 2-d ultrasound-like image of a vessel with three nested
regions: dark lumen at the centre, a bright high-variance plaque ring, and
medium-texture surrounding tissue.  Region boundaries are star-convex curves
``r(theta)`` built from a truncated Fourier series, so the ground-truth
contours are analytic (the label map is rasterized from the *same* radius
functions).  Optional extras: a bright calcification arc inside the plaque
with a darkened acoustic-shadow sector behind it, and a bright catheter
ring artifact around the centre.

Everything is a pure function of ``(spec, index)`` via keyed
:class:`~ivusgan.rng.Rng` sub-streams: regeneration is bit-exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .imgio import to_uint8, write_pgm
from .segment import write_contour
from .rng import Rng
from .tensor import Tensor

# per-class base intensities and relative speckle strengths
CLASS_LUMEN, CLASS_PLAQUE, CLASS_TISSUE = 0, 1, 2
BASE_INTENSITY = np.array([0.10, 0.70, 0.38])
SPECKLE_REL = np.array([0.25, 1.00, 0.50])
CALC_INTENSITY = 0.92
CONTOUR_VERTICES = 128
LU_HARMONICS = 5
TH_HARMONICS = 3
_LU_AMP = 0.06   # per-harmonic amplitude scale, divided by harmonic order
_TH_AMP = 0.08
_LU_PERT_CAP = 0.18  # max radius modulation, keeps curves star-convex
_TH_PERT_CAP = 0.20


class PhantomError(ValueError):
    pass


@dataclass
class PhantomSpec:
    """Generation parameters. Radius ranges are fractions of half the image size."""

    image_size: int = 64
    lumen_radius_range: tuple = (0.22, 0.36)
    plaque_thickness_range: tuple = (0.10, 0.20)
    center_jitter: float = 2.0
    speckle_contrast: float = 0.4
    calcification_probability: float = 0.2
    shadow_attenuation: float = 0.5
    catheter_ring_radius: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        s = self.image_size
        if s < 16 or (s & (s - 1)) != 0:
            raise PhantomError(f"image_size must be a power of two >= 16, got {s}")
        lo, hi = self.lumen_radius_range
        tlo, thi = self.plaque_thickness_range
        if not (0.0 < lo <= hi):
            raise PhantomError(f"bad lumen_radius_range {self.lumen_radius_range}")
        if not (0.0 < tlo <= thi):
            raise PhantomError(f"bad plaque_thickness_range {self.plaque_thickness_range}")
        if hi + thi > 0.72:
            raise PhantomError(
                f"lumen_radius + plaque_thickness may reach {hi + thi:.2f} of half-size; "
                "must stay <= 0.72 to leave room for boundary modulation"
            )
        for name in ("speckle_contrast", "calcification_probability", "shadow_attenuation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PhantomError(f"{name} must be in [0, 1], got {v}")
        if self.center_jitter < 0 or self.center_jitter > s / 8:
            raise PhantomError(f"center_jitter must be in [0, {s / 8}], got {self.center_jitter}")
        if self.catheter_ring_radius < 0:
            raise PhantomError(f"catheter_ring_radius must be >= 0")


@dataclass
class VesselGeometry:
    """Analytic boundary geometry: star-convex radius functions about a centre."""

    center: np.ndarray          # (2,) pixel coords (x, y)
    lu_base: float              # px
    lu_cos: np.ndarray
    lu_sin: np.ndarray
    th_base: float              # px
    th_cos: np.ndarray
    th_sin: np.ndarray
    calcification: tuple | None = None  # (center_angle, width) radians

    def _modulation(self, theta, cos_c, sin_c):
        theta = np.asarray(theta, dtype=np.float64)
        mod = np.zeros_like(theta)
        for h in range(len(cos_c)):
            mod += cos_c[h] * np.cos((h + 1) * theta) + sin_c[h] * np.sin((h + 1) * theta)
        return mod

    def lu_radius(self, theta):
        return self.lu_base * (1.0 + self._modulation(theta, self.lu_cos, self.lu_sin))

    def ma_radius(self, theta):
        thick = self.th_base * (1.0 + self._modulation(theta, self.th_cos, self.th_sin))
        return self.lu_radius(theta) + thick

    def contour(self, which: str, n: int = CONTOUR_VERTICES) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(n) / n
        r = self.lu_radius(theta) if which == "lu" else self.ma_radius(theta)
        return np.stack(
            [self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=1
        )


@dataclass
class Sample:
    """One training pair plus ground truth.

    ``condition_image``: (1,H,W) float32 in [-1, 1].
    ``target_image``: (3,H,W) float32 one-hot classes mapped to {-1, +1}.
    ``label_map``: (H,W) uint8, 0 = lumen, 1 = plaque, 2 = tissue.
    Contours are closed (M,2) polygons in (x, y) pixel coordinates,
    positively oriented under the shoelace formula.
    """

    condition_image: Tensor
    target_image: Tensor
    label_map: np.ndarray
    lu_contour: np.ndarray
    ma_contour: np.ndarray
    index: int = 0
    geometry: VesselGeometry | None = None


def one_hot_pm1(label_map: np.ndarray, n_classes: int = 3) -> np.ndarray:
    """One-hot encode to {-1, +1} per channel (Tanh output range)."""
    out = -np.ones((n_classes,) + label_map.shape, dtype=np.float32)
    for c in range(n_classes):
        out[c][label_map == c] = 1.0
    return out


def _bounded_harmonics(rng: Rng, n: int, amp: float, cap: float):
    scale = amp / (1.0 + np.arange(n))
    cos_c = (2.0 * rng.uniform(n) - 1.0) * scale
    sin_c = (2.0 * rng.uniform(n) - 1.0) * scale
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    mod = np.zeros_like(theta)
    for h in range(n):
        mod += cos_c[h] * np.cos((h + 1) * theta) + sin_c[h] * np.sin((h + 1) * theta)
    peak = float(np.max(np.abs(mod)))
    if peak > cap:
        cos_c *= cap / peak
        sin_c *= cap / peak
    return cos_c, sin_c


def _draw_geometry(spec: PhantomSpec, rng: Rng) -> VesselGeometry:
    half = spec.image_size / 2.0
    g = rng.split("geom")
    lo, hi = spec.lumen_radius_range
    tlo, thi = spec.plaque_thickness_range
    lu_base = (lo + (hi - lo) * float(g.uniform())) * half
    th_base = (tlo + (thi - tlo) * float(g.uniform())) * half
    c0 = (spec.image_size - 1) / 2.0
    jitter = spec.center_jitter * (2.0 * g.uniform(2) - 1.0)
    center = np.array([c0, c0]) + jitter
    lu_cos, lu_sin = _bounded_harmonics(g.split("lu"), LU_HARMONICS, _LU_AMP, _LU_PERT_CAP)
    th_cos, th_sin = _bounded_harmonics(g.split("th"), TH_HARMONICS, _TH_AMP, _TH_PERT_CAP)

    calc = None
    c = rng.split("calc")
    if float(c.uniform()) < spec.calcification_probability:
        calc = (2.0 * np.pi * float(c.uniform()), 0.35 + 0.55 * float(c.uniform()))

    geom = VesselGeometry(center, lu_base, lu_cos, lu_sin, th_base, th_cos, th_sin, calc)
    # safety clamp: outer boundary must stay inside the frame
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    max_ma = float(np.max(geom.ma_radius(theta)))
    border = min(center[0], center[1], spec.image_size - 1 - center[0], spec.image_size - 1 - center[1])
    limit = border - 1.5
    if max_ma > limit:
        shrink = limit / max_ma
        geom.lu_base *= shrink
        geom.th_base *= shrink
    return geom


def _angular_in_arc(theta, center_angle, width):
    d = np.mod(theta - center_angle + np.pi, 2.0 * np.pi) - np.pi
    return np.abs(d) <= width / 2.0


def generate_phantom(spec: PhantomSpec, index: int) -> Sample:
    """Render sample ``index`` of the stream defined by ``spec.seed``."""
    spec.validate()
    rng = Rng(spec.seed).split("phantom", index)
    geom = _draw_geometry(spec, rng)
    s = spec.image_size

    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    dx, dy = xx - geom.center[0], yy - geom.center[1]
    rho = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    r_lu = geom.lu_radius(theta)
    r_ma = geom.ma_radius(theta)
    label_map = np.full((s, s), CLASS_TISSUE, dtype=np.uint8)
    label_map[rho < r_ma] = CLASS_PLAQUE
    label_map[rho < r_lu] = CLASS_LUMEN

    base = BASE_INTENSITY[label_map]
    rel = SPECKLE_REL[label_map]
    z = np.clip(rng.split("tex").normal((s, s)), -2.5, 2.5)
    img = base * (1.0 + spec.speckle_contrast * rel * z)

    if geom.calcification is not None:
        angle_c, width = geom.calcification
        in_arc = _angular_in_arc(theta, angle_c, width)
        calc = in_arc & (rho >= (r_lu + r_ma) / 2.0) & (rho < r_ma)
        img[calc] = CALC_INTENSITY * (1.0 + 0.1 * spec.speckle_contrast * z[calc])
        shadow = in_arc & (rho >= r_ma)
        img[shadow] *= 1.0 - spec.shadow_attenuation

    if spec.catheter_ring_radius > 0:
        ring = np.abs(rho - spec.catheter_ring_radius) < 1.0
        img[ring] = 0.9

    img = np.clip(img, 0.0, 1.0)
    u = Tensor((2.0 * img - 1.0).astype(np.float32)[None, :, :])
    v = Tensor(one_hot_pm1(label_map))
    return Sample(
        condition_image=u,
        target_image=v,
        label_map=label_map,
        lu_contour=geom.contour("lu"),
        ma_contour=geom.contour("ma"),
        index=index,
        geometry=geom,
    )


def profile_line(image, center, angle, n_samples: int) -> np.ndarray:
    """Bilinear intensity samples along a radial ray.

    ``image`` is a 2-d array (or (1,H,W) tensor/array); ``angle`` is in
    radians; samples lie at ``n_samples`` uniform radii from the centre to
    the image border along the ray.
    """
    if isinstance(image, Tensor):
        image = image.data
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[0] == 1:
        image = image[0]
    if image.ndim != 2:
        raise ValueError(f"profile_line needs a 2-d image, got shape {image.shape}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    h, w = image.shape
    cx, cy = float(center[0]), float(center[1])
    if not (0.0 <= cx <= w - 1 and 0.0 <= cy <= h - 1):
        raise ValueError(f"ray exits image bounds: center ({cx}, {cy}) outside image {w}x{h}")
    dx, dy = np.cos(angle), np.sin(angle)
    r_max = np.inf
    for d, c, limit in ((dx, cx, w - 1.0), (dy, cy, h - 1.0)):
        if d > 1e-12:
            r_max = min(r_max, (limit - c) / d)
        elif d < -1e-12:
            r_max = min(r_max, -c / d)
    r_max = max(r_max, 0.0)
    radii = np.linspace(0.0, r_max, n_samples)
    xs, ys = cx + radii * dx, cy + radii * dy
    return bilinear_sample(image, xs, ys)


def bilinear_sample(image: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear interpolation at (x, y) points; points must lie in bounds."""
    h, w = image.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.int64), w - 2) if w > 1 else np.zeros_like(xs, dtype=np.int64)
    y0 = np.minimum(np.floor(ys).astype(np.int64), h - 2) if h > 1 else np.zeros_like(ys, dtype=np.int64)
    fx, fy = xs - x0, ys - y0
    x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bot * fy


@dataclass
class Dataset:
    train: list
    val: list
    test: list
    manifest: dict = field(default_factory=dict)

    def all_samples(self):
        return self.train + self.val + self.test


def make_dataset(spec: PhantomSpec, n_train: int, n_val: int, n_test: int) -> Dataset:
    """Disjoint index ranges: train [0, n_train), val, test follow in order."""
    spec.validate()
    for name, n in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if n < 1:
            raise PhantomError(f"{name} must be >= 1, got {n}")
    idx = 0
    splits = {}
    samples = {}
    for split, n in (("train", n_train), ("val", n_val), ("test", n_test)):
        indices = list(range(idx, idx + n))
        splits[split] = indices
        samples[split] = [generate_phantom(spec, i) for i in indices]
        idx += n
    manifest = {
        "format": 1,
        "spec": _spec_to_jsonable(spec),
        "splits": splits,
    }
    return Dataset(samples["train"], samples["val"], samples["test"], manifest)


def _spec_to_jsonable(spec: PhantomSpec) -> dict:
    d = asdict(spec)
    d["lumen_radius_range"] = list(spec.lumen_radius_range)
    d["plaque_thickness_range"] = list(spec.plaque_thickness_range)
    return d


def spec_from_dict(d: dict) -> PhantomSpec:
    known = {f: d[f] for f in PhantomSpec.__dataclass_fields__ if f in d}
    unknown = set(d) - set(PhantomSpec.__dataclass_fields__)
    if unknown:
        raise PhantomError(f"unknown phantom spec fields: {sorted(unknown)}")
    for key in ("lumen_radius_range", "plaque_thickness_range"):
        if key in known:
            known[key] = tuple(known[key])
    spec = PhantomSpec(**known)
    spec.validate()
    return spec


def save_dataset(dataset: Dataset, out_dir) -> dict:
    """Write PGM images, label maps, contour vertex files and manifest.json.

    The manifest is the source of truth: loaders regenerate exact float data
    from it; the PGM/text files are a quantized export for inspection and
    interop.  Returns the manifest (with file lists) that was written.
    """
    out_dir = str(out_dir)
    for sub in ("images", "labels", "contours"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    manifest = dict(dataset.manifest)
    files = {}
    for split, samples in (("train", dataset.train), ("val", dataset.val), ("test", dataset.test)):
        for sample in samples:
            i = sample.index
            entry = {
                "image": f"images/img_{i:04d}.pgm",
                "labels": f"labels/lab_{i:04d}.pgm",
                "lu_contour": f"contours/lu_{i:04d}.txt",
                "ma_contour": f"contours/ma_{i:04d}.txt",
                "split": split,
            }
            img01 = (sample.condition_image.data[0] + 1.0) / 2.0
            write_pgm(os.path.join(out_dir, entry["image"]), to_uint8(img01))
            write_pgm(os.path.join(out_dir, entry["labels"]), sample.label_map)
            write_contour(os.path.join(out_dir, entry["lu_contour"]), sample.lu_contour)
            write_contour(os.path.join(out_dir, entry["ma_contour"]), sample.ma_contour)
            files[str(i)] = entry
    manifest["files"] = files
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_dataset(in_dir) -> Dataset:
    """Regenerate the dataset recorded by ``save_dataset`` (bit-exact)."""
    with open(os.path.join(str(in_dir), "manifest.json")) as fh:
        manifest = json.load(fh)
    spec = spec_from_dict(manifest["spec"])
    splits = manifest["splits"]
    ds = Dataset(
        [generate_phantom(spec, i) for i in splits["train"]],
        [generate_phantom(spec, i) for i in splits["val"]],
        [generate_phantom(spec, i) for i in splits["test"]],
        manifest,
    )
    return ds


