"""Region and contour agreement measures.

Four measures per boundary (lumen LU, media-adventitia MA):

* ``jaccard`` -- |A n B| / |A u B| on region masks (1.0 when both empty).
* ``pad`` -- percentage area difference, |area(pred)-area(true)|/area(true)*100;
  normalized by the ground-truth area, so it is not symmetric.
* ``hausdorff`` -- symmetric worst-case distance between contours.
* ``avg_distance`` -- symmetric mean nearest-neighbour distance.

Distances are computed point-to-point on arc-length resampled polygons
(pitch <= 0.25 px), which keeps them exactly checkable against an O(n^2)
brute-force oracle; the resampling pitch bounds the error vs. the continuous
curves.  ``Calibration.pixel_spacing`` converts to physical units (defaults
to 1.0: plain pixel units).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .segment import SegmentationError, binarize, lu_ma_boundaries

RESAMPLE_PITCH = 0.25  # px


class MetricError(ValueError):
    pass


@dataclass
class Calibration:
    pixel_spacing: float = 1.0  # length per pixel (mm when calibrated)

    def __post_init__(self):
        if self.pixel_spacing <= 0:
            raise MetricError(f"pixel_spacing must be > 0, got {self.pixel_spacing}")


@dataclass
class MetricsRecord:
    """One sample's (or an aggregate's) scores; distances are NaN on a miss."""

    lu_jm: float = math.nan
    ma_jm: float = math.nan
    lu_pad: float = math.nan
    ma_pad: float = math.nan
    lu_hd: float = math.nan
    ma_hd: float = math.nan
    lu_ad: float = math.nan
    ma_ad: float = math.nan

    FIELDS = ("lu_jm", "ma_jm", "lu_pad", "ma_pad", "lu_hd", "ma_hd", "lu_ad", "ma_ad")

    def values(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class AggregateMetrics:
    mean: MetricsRecord
    std: MetricsRecord
    n_samples: int
    n_distance_misses: int


def jaccard(pred_mask: np.ndarray, true_mask: np.ndarray) -> float:
    pred_mask = np.asarray(pred_mask, dtype=bool)
    true_mask = np.asarray(true_mask, dtype=bool)
    if pred_mask.shape != true_mask.shape:
        raise MetricError(f"mask shapes differ: {pred_mask.shape} vs {true_mask.shape}")
    union = int(np.logical_or(pred_mask, true_mask).sum())
    if union == 0:
        return 1.0  # both empty: perfect agreement by convention
    inter = int(np.logical_and(pred_mask, true_mask).sum())
    return inter / union


def pad(pred_mask: np.ndarray, true_mask: np.ndarray) -> float:
    pred_mask = np.asarray(pred_mask, dtype=bool)
    true_mask = np.asarray(true_mask, dtype=bool)
    if pred_mask.shape != true_mask.shape:
        raise MetricError(f"mask shapes differ: {pred_mask.shape} vs {true_mask.shape}")
    true_area = int(true_mask.sum())
    if true_area == 0:
        raise MetricError("pad undefined: ground-truth mask is empty")
    return abs(int(pred_mask.sum()) - true_area) / true_area * 100.0


def resample_contour(contour: np.ndarray, max_pitch: float = RESAMPLE_PITCH) -> np.ndarray:
    """Uniform arc-length resampling of a closed polygon."""
    contour = np.asarray(contour, dtype=np.float64)
    if contour.ndim != 2 or contour.shape[1] != 2 or len(contour) < 3:
        raise MetricError(f"degenerate contour: shape {contour.shape}")
    closed = np.vstack([contour, contour[:1]])
    seg = np.sqrt(((np.diff(closed, axis=0)) ** 2).sum(axis=1))
    length = float(seg.sum())
    if length <= 0:
        raise MetricError("degenerate contour: zero perimeter")
    n = max(8, int(np.ceil(length / max_pitch)))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(n) * (length / n)
    xs = np.interp(targets, s, closed[:, 0])
    ys = np.interp(targets, s, closed[:, 1])
    return np.stack([xs, ys], axis=1)


def _pairwise_min_dists(pa: np.ndarray, pb: np.ndarray):
    d2 = (pa[:, None, 0] - pb[None, :, 0]) ** 2 + (pa[:, None, 1] - pb[None, :, 1]) ** 2
    d = np.sqrt(d2)
    return d.min(axis=1), d.min(axis=0)


def hausdorff(contour_a: np.ndarray, contour_b: np.ndarray, cal: Calibration | None = None) -> float:
    """max over both directions of nearest-neighbour distance, in spacing units."""
    cal = cal or Calibration()
    pa = resample_contour(contour_a)
    pb = resample_contour(contour_b)
    ab, ba = _pairwise_min_dists(pa, pb)
    return float(max(ab.max(), ba.max())) * cal.pixel_spacing


def avg_distance(contour_a: np.ndarray, contour_b: np.ndarray, cal: Calibration | None = None) -> float:
    """Symmetric mean nearest-neighbour distance: sum both directions / total points."""
    cal = cal or Calibration()
    pa = resample_contour(contour_a)
    pb = resample_contour(contour_b)
    ab, ba = _pairwise_min_dists(pa, pb)
    return float((ab.sum() + ba.sum()) / (len(ab) + len(ba))) * cal.pixel_spacing


def evaluate_sample(pred_labels: np.ndarray, truth, cal: Calibration | None = None) -> MetricsRecord:
    """Score a predicted label map against a ground-truth :class:`Sample`.

    JM/PAD come from region masks; HD/AD compare extracted boundaries with
    the analytic ground-truth contours.  If boundary extraction fails the
    distances are recorded as NaN (a "miss"); JM/PAD are still reported.
    """
    cal = cal or Calibration()
    if pred_labels.shape != truth.label_map.shape:
        raise MetricError(
            f"label shapes differ: {pred_labels.shape} vs {truth.label_map.shape}"
        )
    rec = MetricsRecord()
    for prefix, region in (("lu", "lumen"), ("ma", "lumen_plus_plaque")):
        pm = binarize(pred_labels, region)
        tm = binarize(truth.label_map, region)
        setattr(rec, f"{prefix}_jm", jaccard(pm, tm))
        setattr(rec, f"{prefix}_pad", pad(pm, tm))
    try:
        lu, ma = lu_ma_boundaries(pred_labels)
    except SegmentationError:
        return rec  # distances stay NaN
    rec.lu_hd = hausdorff(lu, truth.lu_contour, cal)
    rec.ma_hd = hausdorff(ma, truth.ma_contour, cal)
    rec.lu_ad = avg_distance(lu, truth.lu_contour, cal)
    rec.ma_ad = avg_distance(ma, truth.ma_contour, cal)
    return rec


def aggregate(records) -> AggregateMetrics:
    """Mean and sample std per field, NaN-aware; counts distance misses."""
    records = list(records)
    if not records:
        raise MetricError("aggregate of zero records")
    mean_rec, std_rec = MetricsRecord(), MetricsRecord()
    for f in MetricsRecord.FIELDS:
        vals = np.asarray([getattr(r, f) for r in records], dtype=np.float64)
        ok = vals[~np.isnan(vals)]
        if ok.size:
            setattr(mean_rec, f, float(ok.mean()))
            if ok.size == 1 or np.all(ok == ok[0]):
                setattr(std_rec, f, 0.0)  # identical values: exactly zero spread
            else:
                setattr(std_rec, f, float(ok.std(ddof=1)))
    misses = sum(1 for r in records if math.isnan(r.lu_hd) or math.isnan(r.ma_hd))
    return AggregateMetrics(mean_rec, std_rec, len(records), misses)
