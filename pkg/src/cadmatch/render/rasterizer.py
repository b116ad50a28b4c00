"""Software renderer: perspective projection, near-plane clipping, flat
Lambertian shading and a depth-buffered fill (compiled or numpy backend).

Deterministic by construction: no engine state, the only randomness is the
per-image background intensity drawn from the configured seed.
"""

from dataclasses import dataclass

import numpy as np

from .backend import get_kernel
from .camera import ring_cameras
from .image import Image, ViewSet

__all__ = ["RenderConfig", "render_view", "render_views", "rasterize_mesh"]


@dataclass
class RenderConfig:
    width: int = 224
    height: int = 224
    view_count: int = 4
    fov_deg: float = 40.0
    ring_radius: float = 2.0
    elevation_deg: float = 0.0
    object_scale: float = 0.5
    # rotates the model so the camera ring sweeps it the right way up
    pre_pitch_deg: float = 90.0
    near: float = 0.05
    far: float = 100.0
    ambient: float = 0.25
    diffuse: float = 0.7
    # view-space light direction (headlight-style, moves with the camera)
    light_dir: tuple = (0.35, 0.45, 0.82)
    background_seed: int = 0
    backend: str = None

    def to_dict(self):
        d = dict(self.__dict__)
        d["light_dir"] = list(self.light_dir)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "light_dir" in d:
            d["light_dir"] = tuple(d["light_dir"])
        return cls(**d)


def _pitch_matrix(deg):
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _clip_near(tri_view, near):
    """Sutherland-Hodgman clip of view-space triangles against z <= -near.

    Returns (triangles, parent_index); fragments inherit the parent's shade.
    """
    z = tri_view[:, :, 2]
    inside = z <= -near
    n_in = inside.sum(axis=1)
    full = n_in == 3
    out_tris = [tri_view[full]]
    out_parent = [np.flatnonzero(full)]
    partial = np.flatnonzero((n_in > 0) & (n_in < 3))
    for t in partial:
        poly = []
        corners = tri_view[t]
        for i in range(3):
            a, b = corners[i], corners[(i + 1) % 3]
            a_in, b_in = a[2] <= -near, b[2] <= -near
            if a_in:
                poly.append(a)
            if a_in != b_in:
                frac = (-near - a[2]) / (b[2] - a[2])
                poly.append(a + frac * (b - a))
        for i in range(1, len(poly) - 1):
            out_tris.append(np.array([poly[0], poly[i], poly[i + 1]])[None])
            out_parent.append(np.array([t]))
    return np.concatenate(out_tris), np.concatenate(out_parent)


def rasterize_mesh(mesh, cam, cfg):
    """Render to raw (shade, depth) float64 buffers; background is NaN shade
    and +inf depth. Exposed for tests that need coverage masks."""
    shade_buf = np.full((cfg.height, cfg.width), np.nan, dtype=np.float64)
    depth_buf = np.full((cfg.height, cfg.width), np.inf, dtype=np.float64)

    verts = mesh.vertices @ _pitch_matrix(cfg.pre_pitch_deg).T * cfg.object_scale
    right, up, forward = cam.basis()
    view_rot = np.stack([right, up, -forward])
    verts_view = (verts - np.asarray(cam.position, dtype=np.float64)) @ view_rot.T
    tri_view = verts_view[mesh.faces]

    tri_view, parent = _clip_near(tri_view, cfg.near)
    if len(tri_view) == 0:
        return shade_buf, depth_buf

    # flat Lambert per original face, normals taken in view space
    full_tri = verts_view[mesh.faces]
    normal = np.cross(
        full_tri[:, 1] - full_tri[:, 0], full_tri[:, 2] - full_tri[:, 0]
    )
    norm = np.linalg.norm(normal, axis=1, keepdims=True)
    normal = np.divide(normal, norm, out=np.zeros_like(normal), where=norm > 0)
    light = np.asarray(cfg.light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    # two-sided lighting: CAD exports do not guarantee consistent winding
    shade = np.clip(cfg.ambient + cfg.diffuse * np.abs(normal @ light), 0.0, 1.0)
    shade = shade[parent]

    focal = 1.0 / np.tan(np.radians(cam.fov_deg) / 2.0)
    z_view = tri_view[:, :, 2]
    a = (cfg.far + cfg.near) / (cfg.near - cfg.far)
    b = 2.0 * cfg.far * cfg.near / (cfg.near - cfg.far)
    x_ndc = focal * tri_view[:, :, 0] / -z_view
    y_ndc = focal * tri_view[:, :, 1] / -z_view
    z_ndc = (a * z_view + b) / -z_view
    sx = (x_ndc + 1.0) * 0.5 * cfg.width
    sy = (1.0 - y_ndc) * 0.5 * cfg.height

    xy = np.ascontiguousarray(np.stack([sx, sy], axis=2))
    get_kernel(cfg.backend)(
        xy, np.ascontiguousarray(z_ndc), np.ascontiguousarray(shade),
        shade_buf, depth_buf,
    )
    return shade_buf, depth_buf


def render_view(mesh, cam, cfg, background_seed=None):
    """One shaded view. The background is a single random gray level from
    the seed; foreground shading depends only on geometry, camera and light."""
    seed = cfg.background_seed if background_seed is None else background_seed
    background = np.random.default_rng(seed).uniform(0.0, 1.0)
    shade_buf, depth_buf = rasterize_mesh(mesh, cam, cfg)
    covered = np.isfinite(depth_buf)
    data = np.where(covered, shade_buf, background)
    return Image(data.astype(np.float32), blank=not covered.any(), mask=covered)


def render_views(mesh, cfg, seed=0):
    """Full ring of views with per-view background seeds derived from seed."""
    cams = ring_cameras(
        cfg.view_count, cfg.ring_radius, cfg.elevation_deg, fov_deg=cfg.fov_deg
    )
    children = np.random.SeedSequence(seed).spawn(len(cams))
    images = [
        render_view(mesh, cam, cfg, background_seed=child)
        for cam, child in zip(cams, children)
    ]
    return ViewSet(images, model_id=mesh.model_id)
