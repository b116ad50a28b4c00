"""Procedural part generators: topology, determinism, jitter, separation."""

import numpy as np
import pytest

from cadmatch.errors import UnsupportedClassError
from cadmatch.geometry import (
    euler_characteristic,
    gen_procedural,
    generator_classes,
    normalize_unit_sphere,
    sample_surface,
)

# closed lathe solids are genus 1 (V - E + F = 0); the direct builders are
# genus 0 (V - E + F = 2)
GENUS1 = ["washer", "nut", "pipe", "flange", "gear"]
GENUS0 = ["bracket", "elbow", "sphere-cap"]


def test_class_roster():
    classes = generator_classes()
    assert classes == sorted(classes)
    assert set(GENUS1 + GENUS0) <= set(classes)
    assert len(classes) >= 8


@pytest.mark.parametrize("name", GENUS1)
def test_lathe_classes_are_genus_one(name):
    for seed in (0, 1, 2):
        mesh = gen_procedural(name, seed=seed)
        assert euler_characteristic(mesh) == 0, (name, seed)


@pytest.mark.parametrize("name", GENUS0)
def test_direct_classes_are_genus_zero(name):
    for seed in (0, 1, 2):
        mesh = gen_procedural(name, seed=seed)
        assert euler_characteristic(mesh) == 2, (name, seed)


def test_pipe_bounding_box_matches_parameters():
    mesh = gen_procedural("pipe", params={"radius": 0.4, "length": 2.0}, seed=0)
    extent = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    # the circular cross-section is a polygon, so allow tessellation slack
    np.testing.assert_allclose(extent, [0.8, 0.8, 2.0], rtol=0.02)


def test_same_seed_is_byte_identical():
    for name in generator_classes():
        a = gen_procedural(name, seed=5)
        b = gen_procedural(name, seed=5)
        assert a.vertices.tobytes() == b.vertices.tobytes()
        assert a.faces.tobytes() == b.faces.tobytes()


def test_seeds_jitter_geometry():
    for name in generator_classes():
        a = gen_procedural(name, seed=0)
        b = gen_procedural(name, seed=1)
        assert (
            a.vertices.shape != b.vertices.shape
            or not np.array_equal(a.vertices, b.vertices)
        ), name


def test_unknown_class_rejected():
    with pytest.raises(UnsupportedClassError):
        gen_procedural("doohickey", seed=0)


def test_positive_surface_area():
    for name in generator_classes():
        mesh = gen_procedural(name, seed=3)
        assert mesh.total_area() > 0


def _signature(mesh, seed):
    """Shape descriptor: quantiles of radius, height, xy-radius and pairwise
    distances over surface samples, plus the radial silhouette profile by
    height band and the angular modulation of the outer wall (hex flats,
    gear teeth). Quantiles and band means, not histograms, so the value is
    stable under resampling noise."""
    pc = normalize_unit_sphere(sample_surface(mesh, 4096, seed=seed))
    pts = pc.points
    radii = np.linalg.norm(pts, axis=1)
    rho = np.linalg.norm(pts[:, :2], axis=1)
    rng = np.random.default_rng(seed + 1)
    sub = pts[rng.choice(len(pts), size=512, replace=False)]
    d2 = np.linalg.norm(sub[:, None] - sub[None, :], axis=2)[np.triu_indices(512, 1)]

    # mean xy-radius within six equal-count z bands traces the silhouette
    order = np.argsort(pts[:, 2], kind="stable")
    chunks = np.array_split(order, 6)
    bands = [rho[chunk].mean() for chunk in chunks]

    # bore clearance: the low rho quantile in the middle z slab is near the
    # bore radius for a through-hole part and near the wall for a solid one
    z = pts[:, 2]
    z_mid = 0.5 * (z.max() + z.min())
    slab = np.abs(z - z_mid) <= 0.25 * max(z.max() - z.min(), 1e-9)
    clearance = np.quantile(rho[slab], 0.05) if slab.any() else rho.min()

    # angular modulation of the outer wall: radius spread among the points
    # near the outer boundary; zero for a surface of revolution, small for
    # hex flats, large for gear teeth
    outer = rho >= 0.75 * rho.max()
    modulation = rho[outer].std() / max(rho[outer].mean(), 1e-9)
    # teeth touch the outermost radius over narrow azimuth arcs, flats and
    # plain walls over wide ones
    coverage = float(np.mean(rho >= 0.92 * rho.max()))

    return np.concatenate(
        [
            np.quantile(radii, np.linspace(0.05, 0.95, 16)),
            np.quantile(pts[:, 2], np.linspace(0.05, 0.95, 12)),
            np.quantile(rho, np.linspace(0.05, 0.95, 8)),
            np.quantile(d2, np.linspace(0.05, 0.95, 12)),
            bands,
            # weighted so a ~10% wall modulation counts like a 0.4 length gap
            [4.0 * modulation, coverage, 2.0 * clearance],
        ]
    )


def test_interclass_separation_exceeds_intraclass_spread():
    # generator jitter must stay small enough that classes do not overlap
    per_class = {}
    for name in generator_classes():
        per_class[name] = [
            _signature(gen_procedural(name, seed=s), seed=100 + s) for s in range(4)
        ]
    for name, sigs in per_class.items():
        intra = max(
            np.linalg.norm(sigs[i] - sigs[j])
            for i in range(len(sigs))
            for j in range(i + 1, len(sigs))
        )
        inter = min(
            np.linalg.norm(a - b)
            for other, others in per_class.items()
            if other != name
            for a in sigs
            for b in others
        )
        assert inter > intra, (name, intra, inter)
