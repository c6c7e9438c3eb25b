"""Rotation and scaling augmentation of paired samples.

Intensities are resampled bilinearly, label maps with nearest-neighbour
(never inventing class values), and the ground-truth contours are
transformed analytically, so augmented ground truth stays exact.  The
one-hot target image is re-encoded from the transformed label map (bilinear
interpolation of a {-1,+1} image would break the argmax/label agreement).

Angle convention: ``angle_degrees = 90`` equals ``np.rot90(plane, 1)``, an
exact pixel permutation; general angles rotate about the pixel-grid centre
``((S-1)/2, (S-1)/2)`` with the matching orientation.  Out-of-frame pixels
fill with the tissue class and its base intensity.
"""

from __future__ import annotations

import numpy as np

from .phantom import BASE_INTENSITY, CLASS_TISSUE, Sample, bilinear_sample, one_hot_pm1
from .rng import Rng
from .tensor import Tensor

SCALE_MIN, SCALE_MAX = 0.5, 1.5  # envelope keeping default vessels in frame

_TISSUE_FILL = float(2.0 * BASE_INTENSITY[CLASS_TISSUE] - 1.0)  # in [-1,1] units


def _rotation_matrix(angle_degrees: float) -> np.ndarray:
    # matches np.rot90 at 90-degree multiples for (x, y) = (col, row) coords
    a = np.deg2rad(angle_degrees)
    return np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]])


def transform_contour(contour: np.ndarray, matrix: np.ndarray, center: np.ndarray) -> np.ndarray:
    return (contour - center) @ matrix.T + center


def _inverse_map_grid(shape, matrix_inv, center):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    pts = np.stack([xx.ravel() - center[0], yy.ravel() - center[1]], axis=1)
    src = pts @ matrix_inv.T + center
    return src[:, 0].reshape(h, w), src[:, 1].reshape(h, w)


def _resample_image(img: np.ndarray, xs, ys, fill: float) -> np.ndarray:
    h, w = img.shape
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    out = np.full(img.shape, fill, dtype=np.float64)
    out[inside] = bilinear_sample(img, xs[inside], ys[inside])
    return out


def _resample_labels(labels: np.ndarray, xs, ys) -> np.ndarray:
    h, w = labels.shape
    xn = np.floor(xs + 0.5).astype(np.int64)
    yn = np.floor(ys + 0.5).astype(np.int64)
    inside = (xn >= 0) & (xn <= w - 1) & (yn >= 0) & (yn <= h - 1)
    out = np.full(labels.shape, CLASS_TISSUE, dtype=labels.dtype)
    out[inside] = labels[yn[inside], xn[inside]]
    return out


def _rebuild(sample: Sample, img, labels, lu, ma) -> Sample:
    return Sample(
        condition_image=Tensor(img.astype(np.float32)[None, :, :]),
        target_image=Tensor(one_hot_pm1(labels)),
        label_map=labels,
        lu_contour=lu,
        ma_contour=ma,
        index=sample.index,
        geometry=None,  # analytic radius functions no longer axis-aligned
    )


def rotate_sample(sample: Sample, angle_degrees: float) -> Sample:
    if not 0.0 <= angle_degrees < 360.0:
        raise ValueError(f"angle must be in [0, 360), got {angle_degrees}")
    if angle_degrees == 0.0:
        return sample
    img = sample.condition_image.data[0].astype(np.float64)
    labels = sample.label_map
    h, w = labels.shape
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    mat = _rotation_matrix(angle_degrees)
    if angle_degrees % 90.0 == 0.0:
        k = int(angle_degrees // 90)
        new_img = np.rot90(img, k).copy()
        new_labels = np.rot90(labels, k).copy()
    else:
        xs, ys = _inverse_map_grid(labels.shape, _rotation_matrix(-angle_degrees), center)
        new_img = _resample_image(img, xs, ys, _TISSUE_FILL)
        new_labels = _resample_labels(labels, xs, ys)
    lu = transform_contour(sample.lu_contour, mat, center)
    ma = transform_contour(sample.ma_contour, mat, center)
    return _rebuild(sample, new_img, new_labels, lu, ma)


def scale_sample(sample: Sample, factor: float) -> Sample:
    """Zoom about the image centre; same output size."""
    if not SCALE_MIN <= factor <= SCALE_MAX:
        raise ValueError(f"scale factor {factor} outside envelope [{SCALE_MIN}, {SCALE_MAX}]")
    if factor == 1.0:
        return sample
    img = sample.condition_image.data[0].astype(np.float64)
    labels = sample.label_map
    h, w = labels.shape
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    inv = np.array([[1.0 / factor, 0.0], [0.0, 1.0 / factor]])
    xs, ys = _inverse_map_grid(labels.shape, inv, center)
    new_img = _resample_image(img, xs, ys, _TISSUE_FILL)
    new_labels = _resample_labels(labels, xs, ys)
    mat = np.array([[factor, 0.0], [0.0, factor]])
    lu = transform_contour(sample.lu_contour, mat, center)
    ma = transform_contour(sample.ma_contour, mat, center)
    return _rebuild(sample, new_img, new_labels, lu, ma)


def augment_dataset(samples, n_rotations: int, scale_factors, seed: int):
    """Originals plus rotated and scaled copies per sample.

    Output length is ``len(samples) * (1 + n_rotations + len(scale_factors))``;
    rotation angles are drawn per (seed, sample position), so the expansion
    is deterministic and order-independent across samples.
    """
    if n_rotations < 0:
        raise ValueError(f"n_rotations must be >= 0, got {n_rotations}")
    scale_factors = list(scale_factors)
    rng = Rng(seed).split("augment")
    out = []
    for pos, sample in enumerate(samples):
        out.append(sample)
        angles = rng.split("angles", pos).uniform(n_rotations) * 360.0
        for a in angles:
            out.append(rotate_sample(sample, float(a)))
        for f in scale_factors:
            out.append(scale_sample(sample, float(f)))
    return out
