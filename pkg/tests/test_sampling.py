"""Surface sampling against brute-force counting oracles.

Sampled points are assigned back to triangles with a barycentric containment
check, so the distribution tests never trust the sampler's own bookkeeping.
"""

import numpy as np
import pytest

from cadmatch.errors import DegenerateGeometryError
from cadmatch.geometry import TriMesh, sample_surface


def _assign_to_triangle(points, mesh, tol=1e-9):
    """Index of the first triangle containing each point (planar meshes)."""
    owner = np.full(len(points), -1)
    for t, (a, b, c) in enumerate(mesh.triangles):
        e1, e2 = b - a, c - a
        rel = points - a
        det = e1[0] * e2[1] - e1[1] * e2[0]
        u = (rel[:, 0] * e2[1] - rel[:, 1] * e2[0]) / det
        v = (e1[0] * rel[:, 1] - e1[1] * rel[:, 0]) / det
        inside = (u >= -tol) & (v >= -tol) & (u + v <= 1.0 + tol)
        owner[(owner == -1) & inside] = t
    return owner


def _unit_square_mesh():
    verts = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    return TriMesh(verts, [[0, 1, 2], [0, 2, 3]], model_id="square")


def _one_three_mesh():
    # right triangles with legs (1,1) and (sqrt3, sqrt3): areas 0.5 and 1.5
    s = np.sqrt(3.0)
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [5 + s, 0, 0], [5, s, 0]]
    return TriMesh(verts, [[0, 1, 2], [3, 4, 5]], model_id="onethree")


def test_equal_area_counts_within_binomial_3sigma():
    # n=10000, p=0.5: sigma = sqrt(n p (1-p)) = 50, so 5000 +/- 150
    mesh = _unit_square_mesh()
    pc = sample_surface(mesh, 10_000, seed=0)
    owner = _assign_to_triangle(pc.points, mesh)
    assert (owner >= 0).all()
    counts = np.bincount(owner, minlength=2)
    assert abs(counts[0] - 5000) <= 150
    assert abs(counts[1] - 5000) <= 150


def test_area_ratio_one_to_three_frequencies():
    mesh = _one_three_mesh()
    pc = sample_surface(mesh, 10_000, seed=1)
    owner = _assign_to_triangle(pc.points, mesh)
    assert (owner >= 0).all()
    freq = np.bincount(owner, minlength=2) / 10_000
    assert abs(freq[0] - 0.25) < 0.02
    assert abs(freq[1] - 0.75) < 0.02


def test_single_triangle_barycentric_containment():
    verts = [[0, 0, 0], [2, 0, 0], [0, 3, 0]]
    mesh = TriMesh(verts, [[0, 1, 2]])
    pc = sample_surface(mesh, 500, seed=2)
    owner = _assign_to_triangle(pc.points, mesh)
    assert (owner == 0).all()


def test_face_relabeling_keeps_distribution():
    mesh = _one_three_mesh()
    flipped = TriMesh(mesh.vertices, mesh.faces[::-1], model_id="onethree-r")
    pc = sample_surface(flipped, 10_000, seed=3)
    owner = _assign_to_triangle(pc.points, mesh)  # classify in original order
    freq = np.bincount(owner, minlength=2) / 10_000
    assert abs(freq[0] - 0.25) < 0.02
    assert abs(freq[1] - 0.75) < 0.02


def test_zero_area_sliver_never_sampled():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0], [3, 0, 0], [4, 0, 0]]
    mesh = TriMesh(verts, [[0, 1, 2], [3, 4, 5]])  # second face is collinear
    pc = sample_surface(mesh, 2000, seed=4)
    owner = _assign_to_triangle(pc.points, TriMesh(verts, [[0, 1, 2]]))
    assert (owner == 0).all()


def test_all_degenerate_mesh_rejected():
    verts = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
    mesh = TriMesh(verts, [[0, 1, 2]])
    with pytest.raises(DegenerateGeometryError):
        sample_surface(mesh, 10, seed=0)


def test_seed_determinism():
    mesh = _unit_square_mesh()
    a = sample_surface(mesh, 100, seed=7).points
    b = sample_surface(mesh, 100, seed=7).points
    c = sample_surface(mesh, 100, seed=8).points
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_source_id_propagates():
    pc = sample_surface(_unit_square_mesh(), 10, seed=0)
    assert pc.source_id == "square"
