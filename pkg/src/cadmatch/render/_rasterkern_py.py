"""Depth-buffered triangle fill, pure numpy fallback.

Vectorizes over the pixels of each triangle's bounding box but keeps the
per-pixel arithmetic (operation order included) identical to the compiled
kernel in _rasterkern.pyx, so both backends produce bit-equal buffers.
"""

import numpy as np


def fill_triangles(xy, z, shade, image, depth):
    """See _rasterkern.fill_triangles; identical contract and semantics."""
    height, width = image.shape
    for t in range(xy.shape[0]):
        (x0, y0), (x1, y1), (x2, y2) = xy[t]
        z0, z1, z2 = z[t]
        d = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        if d == 0.0:
            continue
        ix_min = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
        ix_max = min(int(np.ceil(max(x0, x1, x2) - 0.5)), width - 1)
        iy_min = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
        iy_max = min(int(np.ceil(max(y0, y1, y2) - 0.5)), height - 1)
        if ix_min > ix_max or iy_min > iy_max:
            continue
        px = np.arange(ix_min, ix_max + 1, dtype=np.float64) + 0.5
        py = np.arange(iy_min, iy_max + 1, dtype=np.float64) + 0.5
        px, py = np.meshgrid(px, py)
        w0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / d
        w1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / d
        w2 = 1.0 - w0 - w1
        zz = (w0 * z0 + w1 * z1) + w2 * z2
        tile_depth = depth[iy_min : iy_max + 1, ix_min : ix_max + 1]
        hit = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0) & (zz < tile_depth)
        tile_depth[hit] = zz[hit]
        image[iy_min : iy_max + 1, ix_min : ix_max + 1][hit] = shade[t]
