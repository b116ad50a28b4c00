"""Mesh ingestion, surface sampling, normalization, occlusion and procedural shapes."""

from .mesh import TriMesh, parse_obj, load_obj, write_obj
from .sampling import PointCloud, sample_surface, normalize_unit_sphere, occlude
from .pointcloud_io import (
    save_pointcloud,
    load_pointcloud,
    save_pointcloud_csv,
    load_pointcloud_csv,
)
from .procedural import gen_procedural, generator_classes, uv_sphere, euler_characteristic

__all__ = [
    "TriMesh",
    "parse_obj",
    "load_obj",
    "write_obj",
    "PointCloud",
    "sample_surface",
    "normalize_unit_sphere",
    "occlude",
    "save_pointcloud",
    "load_pointcloud",
    "save_pointcloud_csv",
    "load_pointcloud_csv",
    "gen_procedural",
    "generator_classes",
    "uv_sphere",
    "euler_characteristic",
]
