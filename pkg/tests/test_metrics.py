import math

import numpy as np
import pytest

from ivusgan.metrics import (
    AggregateMetrics,
    Calibration,
    MetricError,
    MetricsRecord,
    aggregate,
    avg_distance,
    evaluate_sample,
    hausdorff,
    jaccard,
    pad,
    resample_contour,
)
from ivusgan.phantom import PhantomSpec, generate_phantom
from ivusgan.rng import Rng


def jaccard_enum_oracle(a, b):
    """Set-enumeration Jaccard: walk every pixel, count membership."""
    inter = union = 0
    for p, t in zip(a.ravel().tolist(), b.ravel().tolist()):
        if p and t:
            inter += 1
        if p or t:
            union += 1
    return 1.0 if union == 0 else inter / union


def pad_enum_oracle(a, b):
    na = sum(1 for v in a.ravel().tolist() if v)
    nb = sum(1 for v in b.ravel().tolist() if v)
    return abs(na - nb) / nb * 100.0


def brute_force_distances(contour_a, contour_b):
    """O(n^2) python-loop nearest-neighbour distances on the same resampling.

    Distances use explicit dx*dx + dy*dy (python's float ** 2 goes through
    libm pow, which can differ from multiplication in the last ulp).
    """
    pa = resample_contour(contour_a)
    pb = resample_contour(contour_b)
    mins_ab = np.array(
        [min(math.sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by)) for bx, by in pb)
         for ax, ay in pa]
    )
    mins_ba = np.array(
        [min(math.sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by)) for ax, ay in pa)
         for bx, by in pb]
    )
    hd = max(mins_ab.max(), mins_ba.max())
    ad = (mins_ab.sum() + mins_ba.sum()) / (len(mins_ab) + len(mins_ba))
    return hd, ad


def star_polygon(rng, n_min=12, n_max=40, r_base=6.0):
    n = int(rng.integers(n_min, n_max))
    theta = 2 * np.pi * np.arange(n) / n
    r = r_base * (1.0 + 0.25 * (2 * rng.uniform(n) - 1))
    cx, cy = 10 * rng.uniform(2)
    return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)


def circle(radius, n=64, center=(0.0, 0.0)):
    theta = 2 * np.pi * np.arange(n) / n
    return np.stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)], axis=1
    )


SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_jaccard_identical_and_disjoint():
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    assert jaccard(m, m) == 1.0
    other = np.zeros_like(m)
    other[0, 0] = True
    assert jaccard(m, other) == 0.0
    assert jaccard(np.zeros_like(m), np.zeros_like(m)) == 1.0  # both empty


def test_jaccard_shifted_square_enumeration():
    # 2x2 block vs its 1-px right shift inside a 2x3 frame: overlap 2, union 6
    a = np.zeros((2, 3), dtype=bool)
    b = np.zeros((2, 3), dtype=bool)
    a[:, :2] = True
    b[:, 1:] = True
    assert jaccard(a, b) == pytest.approx(2 / 6)


def test_jaccard_symmetric_pad_not():
    rng = Rng(1)
    a = rng.uniform((8, 8)) < 0.5
    b = rng.uniform((8, 8)) < 0.3
    assert jaccard(a, b) == jaccard(b, a)
    if a.sum() != b.sum():
        assert pad(a, b) != pad(b, a)


def test_pad_values():
    t = np.zeros((10, 10), dtype=bool)
    t.ravel()[:100] = True  # 100 px
    p = np.zeros((10, 10), dtype=bool)
    p.ravel()[:90] = True  # 90 px
    assert pad(p, t) == pytest.approx(10.0)
    assert pad(t, t) == 0.0


def test_pad_permutation_invariant():
    rng = Rng(2)
    t = rng.uniform((6, 6)) < 0.5
    p = rng.uniform((6, 6)) < 0.4
    if not t.any():
        t[0, 0] = True
    base = pad(p, t)
    for i in range(5):
        perm = Rng(3).split(i).permutation(36)
        assert pad(p.ravel()[perm].reshape(6, 6), t.ravel()[perm].reshape(6, 6)) == base


def test_pad_empty_truth_errors():
    with pytest.raises(MetricError, match="empty"):
        pad(np.ones((2, 2), dtype=bool), np.zeros((2, 2), dtype=bool))


def test_mask_metrics_match_enumeration_oracle():
    rng = Rng(9)
    for i in range(200):
        r = rng.split("case", i)
        a = r.uniform((16, 16)) < float(r.split("pa").uniform())
        b = r.uniform((16, 16)) < float(r.split("pb").uniform())
        assert jaccard(a, b) == jaccard_enum_oracle(a, b)
        if b.any():
            assert pad(a, b) == pad_enum_oracle(a, b)


def test_hausdorff_identical_is_zero():
    poly = star_polygon(Rng(5))
    assert hausdorff(poly, poly) == 0.0
    assert avg_distance(poly, poly) == 0.0


def test_hausdorff_offset_unit_squares():
    hd = hausdorff(SQUARE, SQUARE + np.array([1.0, 0.0]))
    assert hd == pytest.approx(1.0, abs=1e-12)


def test_hausdorff_scales_with_contours():
    # similarity scaling is exact for the continuous metric; the discrete
    # point-to-point value tracks it within the resampling pitch
    from ivusgan.metrics import RESAMPLE_PITCH

    a = star_polygon(Rng(6))
    b = star_polygon(Rng(7))
    base = hausdorff(a, b)
    k = 3.0
    assert abs(hausdorff(k * a, k * b) - k * base) <= (k + 1) * RESAMPLE_PITCH
    # when the sample-count floor is active the resampled points scale
    # exactly, so the identity is exact
    tri = np.array([[0.0, 0.0], [0.5, 0.0], [0.25, 0.4]])
    tri2 = tri + np.array([0.3, 0.1])
    assert hausdorff(1.5 * tri, 1.5 * tri2) == pytest.approx(1.5 * hausdorff(tri, tri2), rel=1e-12)


def test_calibration_scales_distances():
    a, b = SQUARE, SQUARE + np.array([1.0, 0.0])
    assert hausdorff(a, b, Calibration(0.5)) == pytest.approx(0.5)
    assert avg_distance(a, b, Calibration(2.0)) == pytest.approx(
        2.0 * avg_distance(a, b), rel=1e-12
    )
    with pytest.raises(MetricError, match="pixel_spacing"):
        Calibration(0.0)


def test_avg_distance_concentric_circles():
    ad = avg_distance(circle(10.0, 256), circle(12.0, 256))
    assert abs(ad - 2.0) / 2.0 < 0.02


def test_distances_match_brute_force_exactly():
    rng = Rng(11)
    for i in range(25):
        r = rng.split("pair", i)
        a = star_polygon(r.split("a"), r_base=4.0)
        b = star_polygon(r.split("b"), r_base=5.0)
        hd_o, ad_o = brute_force_distances(a, b)
        assert hausdorff(a, b) == hd_o
        assert avg_distance(a, b) == ad_o
        assert avg_distance(a, b) <= hausdorff(a, b)


def test_rigid_motion_invariance():
    a = star_polygon(Rng(13), r_base=5.0)
    b = star_polygon(Rng(14), r_base=6.0)
    hd0, ad0 = hausdorff(a, b), avg_distance(a, b)
    ang = 0.7
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    assert abs(hausdorff(a @ rot.T, b @ rot.T) - hd0) < 1e-9
    assert abs(avg_distance(a @ rot.T, b @ rot.T) - ad0) < 1e-9


def test_degenerate_contour_errors():
    with pytest.raises(MetricError, match="degenerate"):
        hausdorff(np.zeros((2, 2)), SQUARE)
    with pytest.raises(MetricError, match="degenerate"):
        resample_contour(np.zeros((5, 2)))


def test_evaluate_sample_perfect_prediction():
    s = generate_phantom(PhantomSpec(seed=17), 0)
    rec = evaluate_sample(s.label_map, s)
    assert rec.lu_jm == 1.0 and rec.ma_jm == 1.0
    assert rec.lu_pad == 0.0 and rec.ma_pad == 0.0
    # raster-vs-analytic contour gap stays within a pixel
    assert 0.0 < rec.lu_hd <= 1.0 and 0.0 < rec.ma_hd <= 1.0
    assert rec.lu_ad <= rec.lu_hd and rec.ma_ad <= rec.ma_hd


def test_evaluate_sample_miss_records_nan_distances():
    s = generate_phantom(PhantomSpec(seed=17), 1)
    all_tissue = np.full_like(s.label_map, 2)
    rec = evaluate_sample(all_tissue, s)
    assert rec.lu_jm == 0.0
    assert rec.lu_pad == 100.0
    assert math.isnan(rec.lu_hd) and math.isnan(rec.ma_ad)


def test_aggregate_mean_std_misses():
    r1 = MetricsRecord(0.9, 0.8, 1.0, 2.0, 0.5, 0.6, 0.1, 0.2)
    r2 = MetricsRecord(0.7, 0.6, 3.0, 4.0, math.nan, math.nan, math.nan, math.nan)
    agg = aggregate([r1, r2])
    assert isinstance(agg, AggregateMetrics)
    assert agg.n_samples == 2 and agg.n_distance_misses == 1
    assert agg.mean.lu_jm == pytest.approx((0.9 + 0.7) / 2)
    assert agg.mean.lu_hd == pytest.approx(0.5)  # nan excluded
    assert agg.std.lu_jm == pytest.approx(np.std([0.9, 0.7], ddof=1))
    same = aggregate([r1, r1, r1])
    assert same.std.lu_jm == 0.0 and same.std.ma_ad == 0.0
    assert aggregate([r1]).std.lu_jm == 0.0  # single record: std 0 by convention
    with pytest.raises(MetricError, match="zero records"):
        aggregate([])
