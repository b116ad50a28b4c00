"""Surface sampling, unit-sphere normalization and occlusion simulation."""

import numpy as np

from ..errors import DegenerateGeometryError, InvalidFractionError, ValidationError

__all__ = ["PointCloud", "sample_surface", "normalize_unit_sphere", "occlude"]


class PointCloud:
    """(N, 3) float64 points plus the id of the model or scan they came from."""

    def __init__(self, points, source_id=""):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.source_id = source_id
        if len(self.points) < 1:
            raise ValidationError("point cloud must contain at least one point")

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"PointCloud(id={self.source_id!r}, n={len(self.points)})"


def sample_surface(mesh, n, seed):
    """Draw n points uniformly over the mesh surface.

    Triangles are picked with probability proportional to area (zero-area
    slivers get zero probability), then a point is drawn uniformly in
    barycentric coordinates. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise DegenerateGeometryError(
            f"mesh {mesh.model_id!r} has zero total surface area"
        )
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(len(areas), size=n, p=areas / total)
    tri = mesh.triangles[face_idx]
    # uniform barycentric draw: fold (u, v) with u+v > 1 back into the triangle
    u = rng.random(n)
    v = rng.random(n)
    over = u + v > 1.0
    u[over] = 1.0 - u[over]
    v[over] = 1.0 - v[over]
    points = (
        tri[:, 0]
        + u[:, None] * (tri[:, 1] - tri[:, 0])
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    )
    return PointCloud(points, source_id=mesh.model_id)


def normalize_unit_sphere(pc):
    """Center at the centroid and scale the farthest point to norm 1.

    A single point (or any zero-radius cloud) is centered and left at scale 1;
    the operation is idempotent within float tolerance.
    """
    points = pc.points - pc.points.mean(axis=0)
    radius = np.linalg.norm(points, axis=1).max()
    if radius > 0.0:
        points = points / radius
    return PointCloud(points, source_id=pc.source_id)


def occlude(pc, direction=None, fraction=0.5, seed=0):
    """Half-space cut simulating a view-dependent partial scan.

    Drops the points with the largest projection onto ``direction``, keeping
    ceil((1 - fraction) * N) points so the result is never empty. When
    ``direction`` is None a random unit vector is drawn from ``seed``.
    """
    if not 0.0 <= fraction < 1.0:
        raise InvalidFractionError(f"fraction must be in [0, 1), got {fraction}")
    n = len(pc.points)
    if direction is None:
        rng = np.random.default_rng(seed)
        direction = rng.normal(size=3)
    direction = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise ValidationError("occlusion direction must be nonzero")
    direction = direction / norm
    keep = int(np.ceil((1.0 - fraction) * n))
    if keep >= n:
        return PointCloud(pc.points.copy(), source_id=pc.source_id)
    projection = pc.points @ direction
    # stable order so ties resolve by point index, deterministically
    order = np.argsort(projection, kind="stable")
    kept = np.sort(order[:keep])
    return PointCloud(pc.points[kept], source_id=pc.source_id)
