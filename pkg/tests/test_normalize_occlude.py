import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cadmatch.errors import InvalidFractionError
from cadmatch.geometry import PointCloud, normalize_unit_sphere, occlude


def _rotation(rng):
    # QR of a Gaussian matrix, determinant forced positive
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def test_two_point_example():
    pc = PointCloud([[1, 1, 1], [3, 1, 1]])
    out = normalize_unit_sphere(pc)
    np.testing.assert_allclose(out.points, [[-1, 0, 0], [1, 0, 0]], atol=1e-12)


def test_idempotent():
    rng = np.random.default_rng(0)
    pc = normalize_unit_sphere(PointCloud(rng.normal(size=(64, 3))))
    again = normalize_unit_sphere(pc)
    np.testing.assert_allclose(again.points, pc.points, atol=1e-6)


def test_single_point_centered_scale_kept():
    out = normalize_unit_sphere(PointCloud([[5, 5, 5]]))
    np.testing.assert_array_equal(out.points, [[0, 0, 0]])


def test_centroid_and_radius_postconditions():
    rng = np.random.default_rng(1)
    out = normalize_unit_sphere(PointCloud(rng.normal(size=(200, 3)) * 40 + 7))
    assert np.abs(out.points.mean(axis=0)).max() < 1e-6
    assert abs(np.linalg.norm(out.points, axis=1).max() - 1.0) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_commutes_with_rotation(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(32, 3)) * rng.uniform(0.1, 30.0)
    rot = _rotation(rng)
    a = normalize_unit_sphere(PointCloud(pts @ rot.T)).points
    b = normalize_unit_sphere(PointCloud(pts)).points @ rot.T
    assert np.abs(a - b).max() < 1e-6


def test_occlude_fraction_zero_is_noop():
    rng = np.random.default_rng(2)
    pc = PointCloud(rng.normal(size=(50, 3)))
    out = occlude(pc, direction=[0, 0, 1], fraction=0.0)
    np.testing.assert_array_equal(out.points, pc.points)


def test_occlude_halfspace_cut_matches_sort_oracle():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(1000, 3))
    pc = PointCloud(pts)
    out = occlude(pc, direction=[0, 0, 1], fraction=0.5)
    # oracle: survivors are exactly the lowest-z half
    z_sorted = np.sort(pts[:, 2])
    cutoff = z_sorted[499]
    assert len(out.points) == 500
    assert out.points[:, 2].max() <= cutoff + 1e-12


def test_occlude_keep_count_example():
    rng = np.random.default_rng(4)
    pc = PointCloud(rng.normal(size=(2048, 3)))
    out = occlude(pc, direction=[1, 0, 0], fraction=0.99)
    assert len(out.points) == 21  # ceil(0.01 * 2048)


def test_occlude_never_empty():
    pc = PointCloud(np.random.default_rng(5).normal(size=(3, 3)))
    out = occlude(pc, direction=[1, 0, 0], fraction=0.999)
    assert len(out.points) >= 1


def test_occlude_preserves_point_order():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(100, 3))
    out = occlude(PointCloud(pts), direction=[0, 1, 0], fraction=0.3)
    kept = {tuple(p) for p in out.points}
    filtered = np.array([p for p in pts if tuple(p) in kept])
    np.testing.assert_array_equal(out.points, filtered)


def test_occlude_invalid_fraction():
    pc = PointCloud([[0, 0, 0], [1, 1, 1]])
    with pytest.raises(InvalidFractionError):
        occlude(pc, direction=[0, 0, 1], fraction=1.0)
    with pytest.raises(InvalidFractionError):
        occlude(pc, direction=[0, 0, 1], fraction=-0.1)


def test_occlude_random_direction_seeded():
    rng = np.random.default_rng(7)
    pc = PointCloud(rng.normal(size=(512, 3)))
    a = occlude(pc, fraction=0.5, seed=11).points
    b = occlude(pc, fraction=0.5, seed=11).points
    c = occlude(pc, fraction=0.5, seed=12).points
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
