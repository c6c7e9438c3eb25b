import numpy as np
import pytest
from scipy import ndimage

from ivusgan.augment import augment_dataset, rotate_sample, scale_sample, transform_contour
from ivusgan.phantom import PhantomSpec, generate_phantom

FOUR_CONN = ndimage.generate_binary_structure(2, 1)


def shoelace_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def check_sample_invariants(s):
    assert set(np.unique(s.label_map)).issubset({0, 1, 2})
    assert np.array_equal(np.argmax(s.target_image.data, axis=0).astype(np.uint8), s.label_map)
    lumen = s.label_map == 0
    inner = s.label_map <= 1
    assert np.all(inner[lumen])
    for mask in (lumen, inner):
        assert mask.any()
        _, n = ndimage.label(mask, structure=FOUR_CONN)
        assert n == 1
    assert len(s.lu_contour) >= 8 and len(s.ma_contour) >= 8


@pytest.fixture(scope="module")
def sample():
    return generate_phantom(PhantomSpec(seed=42), 0)


def test_rotate_zero_is_identity(sample):
    r = rotate_sample(sample, 0.0)
    assert np.array_equal(r.condition_image.data, sample.condition_image.data)
    assert np.array_equal(r.label_map, sample.label_map)
    assert np.array_equal(r.lu_contour, sample.lu_contour)


def test_four_quarter_turns_are_identity(sample):
    s = sample
    for _ in range(4):
        s = rotate_sample(s, 90.0)
    assert np.array_equal(s.label_map, sample.label_map)
    assert np.array_equal(s.condition_image.data, sample.condition_image.data)


def test_quarter_turn_is_exact_permutation(sample):
    r = rotate_sample(sample, 90.0)
    assert np.array_equal(np.sort(r.condition_image.data.ravel()),
                          np.sort(sample.condition_image.data.ravel()))
    assert np.array_equal(r.label_map, np.rot90(sample.label_map))


def test_rotated_contour_area_preserved(sample):
    r = rotate_sample(sample, 37.0)
    assert abs(shoelace_area(r.lu_contour) - shoelace_area(sample.lu_contour)) < 1e-9
    assert abs(shoelace_area(r.ma_contour) - shoelace_area(sample.ma_contour)) < 1e-9


def test_rotation_contour_tracks_mask(sample):
    # rotated analytic contour must still enclose the rotated lumen mask
    r = rotate_sample(sample, 61.0)
    lumen_px = int((r.label_map == 0).sum())
    assert abs(lumen_px - shoelace_area(r.lu_contour)) / lumen_px < 0.05


def test_rotate_invariants_sweep(sample):
    for angle in (13.0, 90.0, 137.5, 180.0, 222.2, 270.0, 315.0):
        check_sample_invariants(rotate_sample(sample, angle))


def test_rotate_angle_validation(sample):
    with pytest.raises(ValueError, match="angle"):
        rotate_sample(sample, 360.0)
    with pytest.raises(ValueError, match="angle"):
        rotate_sample(sample, -5.0)


def test_scale_identity_and_envelope(sample):
    assert scale_sample(sample, 1.0) is sample
    with pytest.raises(ValueError, match="envelope"):
        scale_sample(sample, 0.4)
    with pytest.raises(ValueError, match="envelope"):
        scale_sample(sample, 1.6)


def test_scale_contour_area_quadratic(sample):
    base_lu = shoelace_area(sample.lu_contour)
    base_ma = shoelace_area(sample.ma_contour)
    for f in (0.5, 0.8, 1.25, 1.5):
        s = scale_sample(sample, f)
        assert shoelace_area(s.lu_contour) == pytest.approx(f * f * base_lu, rel=1e-12)
        assert shoelace_area(s.ma_contour) == pytest.approx(f * f * base_ma, rel=1e-12)


def test_scale_preserves_invariants(sample):
    for f in (0.6, 0.9, 1.1, 1.4):
        check_sample_invariants(scale_sample(sample, f))


def test_scale_changes_mask_area_quadratically(sample):
    s = scale_sample(sample, 1.3)
    base = (sample.label_map == 0).sum()
    got = (s.label_map == 0).sum()
    assert abs(got - 1.3 ** 2 * base) / (1.3 ** 2 * base) < 0.08


def test_transform_contour_rotation_matches_numpy():
    poly = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    mat = np.array([[0.0, 1.0], [-1.0, 0.0]])  # 90 degrees in this convention
    out = transform_contour(poly, mat, np.zeros(2))
    assert np.allclose(out, [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def test_augment_dataset_count_and_determinism():
    samples = [generate_phantom(PhantomSpec(seed=3), i) for i in range(4)]
    out = augment_dataset(samples, 3, [0.9, 1.1], seed=7)
    assert len(out) == 4 * (1 + 3 + 2)
    out2 = augment_dataset(samples, 3, [0.9, 1.1], seed=7)
    for a, b in zip(out, out2):
        assert np.array_equal(a.condition_image.data, b.condition_image.data)
    out3 = augment_dataset(samples, 3, [0.9, 1.1], seed=8)
    assert not all(
        np.array_equal(a.condition_image.data, b.condition_image.data)
        for a, b in zip(out, out3)
    )


def test_augment_dataset_noop():
    samples = [generate_phantom(PhantomSpec(seed=3), 0)]
    out = augment_dataset(samples, 0, [], seed=1)
    assert len(out) == 1 and out[0] is samples[0]


def test_augment_dataset_invariants():
    samples = [generate_phantom(PhantomSpec(seed=5), i) for i in range(2)]
    for s in augment_dataset(samples, 2, [0.8, 1.2], seed=11):
        check_sample_invariants(s)
