"""Triangle mesh container and Wavefront OBJ ingestion.

Only ``v`` and ``f`` records are honored; ``vt``/``vn``/``mtl``/``usemtl``
and friends are ignored because rendering downstream is textureless.
"""

import io

import numpy as np

from ..errors import EmptyMeshError, MeshParseError

__all__ = ["TriMesh", "parse_obj", "load_obj", "write_obj"]


class TriMesh:
    """Triangle soup: (V, 3) float64 vertices and (F, 3) int vertex indices.

    Faces need not form a watertight or manifold surface; the only
    requirements are in-range indices and at least one face of positive area.
    """

    def __init__(self, vertices, faces, model_id="", class_label=None):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        self.model_id = model_id
        self.class_label = class_label
        if len(self.faces) == 0:
            raise EmptyMeshError(f"mesh {model_id!r} has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshParseError(
                f"face index out of range for {len(self.vertices)} vertices"
            )

    @property
    def triangles(self):
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_areas(self):
        tri = self.triangles
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_normals(self):
        """Unit normals; degenerate faces get a zero normal."""
        tri = self.triangles
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        return np.divide(cross, norm, out=np.zeros_like(cross), where=norm > 0)

    def total_area(self):
        return float(self.face_areas().sum())

    def transformed(self, matrix=None, scale=1.0, offset=None):
        """New mesh with vertices mapped through ``scale * (M @ v) + offset``."""
        v = self.vertices
        if matrix is not None:
            v = v @ np.asarray(matrix, dtype=np.float64).T
        v = v * scale
        if offset is not None:
            v = v + np.asarray(offset, dtype=np.float64)
        return TriMesh(v, self.faces, self.model_id, self.class_label)

    def __repr__(self):
        return (
            f"TriMesh(id={self.model_id!r}, vertices={len(self.vertices)}, "
            f"faces={len(self.faces)})"
        )


def _resolve_index(raw, n_vertices, line_no):
    """OBJ indices are 1-based; negative values count back from the end."""
    if raw == 0:
        raise MeshParseError("face index 0 is not valid in OBJ", line=line_no)
    idx = raw - 1 if raw > 0 else n_vertices + raw
    if idx < 0 or idx >= n_vertices:
        raise MeshParseError(
            f"face index {raw} out of range ({n_vertices} vertices)", line=line_no
        )
    return idx


def parse_obj(data, model_id="", class_label=None):
    """Parse Wavefront OBJ text (str or bytes) into a TriMesh.

    Polygons with more than three vertices are fan-triangulated around the
    first corner. Raises MeshParseError with the line number on malformed
    records and EmptyMeshError when no faces survive.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    vertices = []
    faces = []
    for line_no, line in enumerate(io.StringIO(data), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError("vertex needs 3 coordinates", line=line_no)
            try:
                vertices.append([float(p) for p in parts[1:4]])
            except ValueError:
                raise MeshParseError(
                    f"bad vertex coordinate {parts[1:4]!r}", line=line_no
                ) from None
        elif tag == "f":
            if len(parts) < 4:
                raise MeshParseError("face needs at least 3 indices", line=line_no)
            corners = []
            for token in parts[1:]:
                # v, v/vt, v//vn and v/vt/vn all reduce to the vertex index
                head = token.split("/")[0]
                try:
                    raw = int(head)
                except ValueError:
                    raise MeshParseError(
                        f"bad face index {token!r}", line=line_no
                    ) from None
                corners.append(_resolve_index(raw, len(vertices), line_no))
            for i in range(1, len(corners) - 1):
                faces.append((corners[0], corners[i], corners[i + 1]))
        # vt / vn / vp / mtllib / usemtl / o / g / s: ignored
    if not faces:
        raise EmptyMeshError("OBJ stream contains no faces")
    return TriMesh(np.array(vertices), np.array(faces), model_id, class_label)


def load_obj(path, model_id=None, class_label=None):
    with open(path, "rb") as fh:
        data = fh.read()
    if model_id is None:
        import os

        model_id = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_obj(data, model_id=model_id, class_label=class_label)


def write_obj(mesh, path):
    """Write a mesh with stable formatting so identical meshes give identical bytes."""
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
