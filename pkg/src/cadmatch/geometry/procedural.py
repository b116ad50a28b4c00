"""Procedural generators for desk-scale mechanical part classes.

Each generator draws its shape parameters from the seed, so instances within
a class differ geometrically while the same (class, seed, params) always
reproduces the identical mesh. Ring-like parts (washer, nut, pipe, flange,
gear) are built by revolving a closed cross-section profile, which yields a
genus-1 surface (V - E + F = 0) by construction.
"""

import numpy as np

from ..errors import UnsupportedClassError
from .mesh import TriMesh

__all__ = ["gen_procedural", "generator_classes", "uv_sphere", "euler_characteristic"]


def _revolve_closed(profile, n_theta, outer_mod=None, model_id="", class_label=None):
    """Revolve a closed (r, z, group) profile loop around the z axis.

    ``outer_mod``, when given, is a function of theta applied as a radial
    scale to profile points whose group is "outer" (hex flats, gear teeth).
    """
    profile = list(profile)
    m = len(profile)
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    vertices = np.empty((n_theta * m, 3), dtype=np.float64)
    for j, theta in enumerate(thetas):
        c, s = np.cos(theta), np.sin(theta)
        for i, (r, z, group) in enumerate(profile):
            if outer_mod is not None and group == "outer":
                r = r * outer_mod(theta)
            vertices[j * m + i] = (r * c, r * s, z)
    faces = []
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        for i in range(m):
            inx = (i + 1) % m
            a = j * m + i
            b = j * m + inx
            c2 = jn * m + inx
            d = jn * m + i
            faces.append((a, b, c2))
            faces.append((a, c2, d))
    return TriMesh(vertices, faces, model_id=model_id, class_label=class_label)


def _hex_mod(theta):
    # polar form of a regular hexagon with inscribed radius 1
    sector = np.mod(theta + np.pi / 6.0, np.pi / 3.0) - np.pi / 6.0
    return 1.0 / np.cos(sector)


def _washer(rng, params):
    r_out = params.get("outer_radius", rng.uniform(0.8, 1.2))
    r_in = params.get("inner_radius", r_out * rng.uniform(0.36, 0.54))
    h = params.get("thickness", r_out * rng.uniform(0.06, 0.15)) / 2.0
    profile = [(r_out, -h, "outer"), (r_out, h, "outer"), (r_in, h, "inner"), (r_in, -h, "inner")]
    return profile, int(params.get("segments", 48)), None


def _nut(rng, params):
    r_flat = params.get("flat_radius", rng.uniform(0.8, 1.2))
    r_hole = params.get("hole_radius", r_flat * rng.uniform(0.42, 0.60))
    h = params.get("thickness", r_flat * rng.uniform(0.50, 0.72)) / 2.0
    profile = [(r_flat, -h, "outer"), (r_flat, h, "outer"), (r_hole, h, "inner"), (r_hole, -h, "inner")]
    return profile, int(params.get("segments", 48)), _hex_mod


def _pipe(rng, params):
    r = params.get("radius", rng.uniform(0.3, 0.5))
    length = params.get("length", r * rng.uniform(3.6, 6.6))
    r_in = params.get("inner_radius", r * rng.uniform(0.58, 0.86))
    h = length / 2.0
    profile = [(r, -h, "outer"), (r, h, "outer"), (r_in, h, "inner"), (r_in, -h, "inner")]
    return profile, int(params.get("segments", 40)), None


def _flange(rng, params):
    r_disc = params.get("disc_radius", rng.uniform(0.9, 1.2))
    t_disc = params.get("disc_thickness", r_disc * rng.uniform(0.10, 0.20))
    r_neck = params.get("neck_radius", r_disc * rng.uniform(0.38, 0.56))
    h_neck = params.get("neck_height", r_disc * rng.uniform(0.36, 0.64))
    r_bore = params.get("bore_radius", r_neck * rng.uniform(0.50, 0.70))
    profile = [
        (r_disc, 0.0, "outer"),
        (r_disc, t_disc, "outer"),
        (r_neck, t_disc, "mid"),
        (r_neck, t_disc + h_neck, "mid"),
        (r_bore, t_disc + h_neck, "inner"),
        (r_bore, 0.0, "inner"),
    ]
    return profile, int(params.get("segments", 48)), None


def _gear(rng, params):
    r_root = params.get("root_radius", rng.uniform(0.8, 1.1))
    teeth = int(params.get("teeth", rng.integers(9, 17)))
    depth = params.get("tooth_depth", rng.uniform(0.20, 0.30))
    r_bore = params.get("bore_radius", r_root * rng.uniform(0.16, 0.36))
    h = params.get("thickness", r_root * rng.uniform(0.24, 0.38)) / 2.0

    def tooth_mod(theta, k=teeth, d=depth):
        bump = np.clip((np.cos(k * theta) - 0.2) / 0.8, 0.0, 1.0)
        return 1.0 + d * bump

    profile = [(r_root, -h, "outer"), (r_root, h, "outer"), (r_bore, h, "inner"), (r_bore, -h, "inner")]
    return profile, int(params.get("segments", max(teeth * 8, 64))), tooth_mod


def _elbow_mesh(rng, params, model_id, class_label):
    """90-degree pipe bend: a quarter torus tube with disc caps."""
    r_tube = params.get("tube_radius", rng.uniform(0.25, 0.4))
    r_bend = params.get("bend_radius", r_tube * rng.uniform(1.9, 3.8))
    nu = int(params.get("sweep_segments", 20))
    nv = int(params.get("tube_segments", 24))
    sweep = np.linspace(0.0, np.pi / 2.0, nu + 1)
    ring_angles = 2.0 * np.pi * np.arange(nv) / nv
    vertices = []
    for u in sweep:
        cu, su = np.cos(u), np.sin(u)
        for v in ring_angles:
            rr = r_bend + r_tube * np.cos(v)
            vertices.append((rr * cu, rr * su, r_tube * np.sin(v)))
    faces = []
    for i in range(nu):
        for j in range(nv):
            jn = (j + 1) % nv
            a = i * nv + j
            b = i * nv + jn
            c = (i + 1) * nv + jn
            d = (i + 1) * nv + j
            faces.append((a, b, c))
            faces.append((a, c, d))
    # cap both ends with a fan around the tube center
    start_center = len(vertices)
    vertices.append((r_bend, 0.0, 0.0))
    end_center = len(vertices)
    vertices.append((0.0, r_bend, 0.0))
    for j in range(nv):
        jn = (j + 1) % nv
        faces.append((start_center, jn, j))
        base = nu * nv
        faces.append((end_center, base + j, base + jn))
    return TriMesh(np.array(vertices), faces, model_id=model_id, class_label=class_label)


def _sphere_cap_mesh(rng, params, model_id, class_label):
    """Spherical dome with a flat base disc."""
    radius = params.get("radius", rng.uniform(0.7, 1.1))
    cap_deg = params.get("cap_angle_deg", rng.uniform(48.0, 80.0))
    n_rings = int(params.get("rings", 10))
    n_theta = int(params.get("segments", 32))
    phis = np.linspace(0.0, np.radians(cap_deg), n_rings + 1)[1:]
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    vertices = [(0.0, 0.0, radius)]
    for phi in phis:
        for theta in thetas:
            vertices.append(
                (
                    radius * np.sin(phi) * np.cos(theta),
                    radius * np.sin(phi) * np.sin(theta),
                    radius * np.cos(phi),
                )
            )
    faces = []
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        faces.append((0, 1 + j, 1 + jn))
    for i in range(n_rings - 1):
        base = 1 + i * n_theta
        nxt = base + n_theta
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            faces.append((base + j, nxt + j, nxt + jn))
            faces.append((base + j, nxt + jn, base + jn))
    base_center = len(vertices)
    z_base = radius * np.cos(phis[-1])
    vertices.append((0.0, 0.0, z_base))
    last = 1 + (n_rings - 1) * n_theta
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        faces.append((base_center, last + jn, last + j))
    return TriMesh(np.array(vertices), faces, model_id=model_id, class_label=class_label)


def _bracket_mesh(rng, params, model_id, class_label):
    """L-shaped plate: legs along +x and +z, extruded along y."""
    a = params.get("leg_a", rng.uniform(1.00, 1.55))
    b = params.get("leg_b", rng.uniform(1.00, 1.55))
    w = params.get("plate_width", rng.uniform(0.18, 0.34))
    depth = params.get("depth", rng.uniform(0.60, 1.05))
    loop = [(0, 0), (a, 0), (a, w), (w, w), (w, b), (0, b)]
    bottom = [(x, 0.0, z) for x, z in loop]
    top = [(x, depth, z) for x, z in loop]
    vertices = np.array(bottom + top, dtype=np.float64)
    # the L hexagon decomposes into two rectangles
    cap = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5)]
    faces = [(aa, cc, bb) for aa, bb, cc in cap]
    faces += [(aa + 6, bb + 6, cc + 6) for aa, bb, cc in cap]
    for i in range(6):
        j = (i + 1) % 6
        faces.append((i, j, 6 + j))
        faces.append((i, 6 + j, 6 + i))
    return TriMesh(vertices, faces, model_id=model_id, class_label=class_label)


_LATHE_BUILDERS = {
    "washer": _washer,
    "nut": _nut,
    "pipe": _pipe,
    "flange": _flange,
    "gear": _gear,
}

_DIRECT_BUILDERS = {
    "elbow": _elbow_mesh,
    "sphere-cap": _sphere_cap_mesh,
    "bracket": _bracket_mesh,
}


def generator_classes():
    """Names of all supported procedural classes, sorted."""
    return sorted(_LATHE_BUILDERS.keys() | _DIRECT_BUILDERS.keys())


def gen_procedural(class_name, params=None, seed=0, model_id=None):
    """Generate one instance of a procedural class.

    ``params`` entries override the seeded jitter (e.g. a pipe with an exact
    length); anything not overridden is drawn deterministically from seed.
    """
    params = dict(params or {})
    if model_id is None:
        model_id = f"{class_name}_{seed}"
    rng = np.random.default_rng(seed)
    if class_name in _LATHE_BUILDERS:
        profile, n_theta, mod = _LATHE_BUILDERS[class_name](rng, params)
        return _revolve_closed(
            profile, n_theta, outer_mod=mod, model_id=model_id, class_label=class_name
        )
    if class_name in _DIRECT_BUILDERS:
        return _DIRECT_BUILDERS[class_name](rng, params, model_id, class_name)
    raise UnsupportedClassError(
        f"no generator for class {class_name!r}; available: {generator_classes()}"
    )


def uv_sphere(radius=1.0, n_lat=24, n_lon=48):
    """Closed UV sphere, used as an analytic test target."""
    phis = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]
    thetas = 2.0 * np.pi * np.arange(n_lon) / n_lon
    vertices = [(0.0, 0.0, radius)]
    for phi in phis:
        for theta in thetas:
            vertices.append(
                (
                    radius * np.sin(phi) * np.cos(theta),
                    radius * np.sin(phi) * np.sin(theta),
                    radius * np.cos(phi),
                )
            )
    south = len(vertices)
    vertices.append((0.0, 0.0, -radius))
    faces = []
    for j in range(n_lon):
        jn = (j + 1) % n_lon
        faces.append((0, 1 + j, 1 + jn))
    for i in range(len(phis) - 1):
        base = 1 + i * n_lon
        nxt = base + n_lon
        for j in range(n_lon):
            jn = (j + 1) % n_lon
            faces.append((base + j, nxt + j, nxt + jn))
            faces.append((base + j, nxt + jn, base + jn))
    last = 1 + (len(phis) - 1) * n_lon
    for j in range(n_lon):
        jn = (j + 1) % n_lon
        faces.append((south, last + jn, last + j))
    return TriMesh(np.array(vertices), faces, model_id="uv_sphere")


def euler_characteristic(mesh):
    """V - E + F with edges counted once regardless of orientation."""
    faces = mesh.faces
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return len(mesh.vertices) - n_edges + len(faces)
