"""Point cloud persistence.

Binary layout (little-endian):
    bytes 0-3   magic b"PCB1"
    bytes 4-7   uint32 N        (point count)
    bytes 8-11  uint32 3        (components per point)
    bytes 12-   float32 data, N * 3 values, row major (x, y, z)

CSV layout: one "x,y,z" line per point, no header; lines starting with '#'
are skipped on read.
"""

import numpy as np

from ..errors import ValidationError
from .sampling import PointCloud

MAGIC = b"PCB1"

__all__ = ["save_pointcloud", "load_pointcloud", "save_pointcloud_csv", "load_pointcloud_csv"]


def save_pointcloud(pc, path):
    points = np.ascontiguousarray(pc.points, dtype="<f4")
    header = MAGIC + np.array([len(points), 3], dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(points.tobytes())


def load_pointcloud(path, source_id=None):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValidationError(f"{path}: bad magic, not a PCB1 point cloud file")
    n, dim = np.frombuffer(blob[4:12], dtype="<u4")
    if dim != 3:
        raise ValidationError(f"{path}: expected 3 components per point, got {dim}")
    data = np.frombuffer(blob[12:], dtype="<f4")
    if data.size != n * 3:
        raise ValidationError(f"{path}: truncated payload ({data.size} of {n * 3} values)")
    if source_id is None:
        import os

        source_id = os.path.splitext(os.path.basename(str(path)))[0]
    return PointCloud(data.reshape(n, 3).astype(np.float64), source_id=source_id)


def save_pointcloud_csv(pc, path):
    with open(path, "w") as fh:
        for x, y, z in pc.points:
            fh.write(f"{x:.9g},{y:.9g},{z:.9g}\n")


def load_pointcloud_csv(path, source_id=None):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{line_no}: expected 3 values per line")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ValidationError(f"{path}:{line_no}: bad coordinate") from None
    if not rows:
        raise ValidationError(f"{path}: no points found")
    if source_id is None:
        import os

        source_id = os.path.splitext(os.path.basename(str(path)))[0]
    return PointCloud(np.array(rows), source_id=source_id)
