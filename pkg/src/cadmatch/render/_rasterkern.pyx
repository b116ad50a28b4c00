# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Depth-buffered triangle fill, compiled inner loop.

Must stay arithmetically identical to _rasterkern_py.fill_triangles: the two
backends are interchangeable at import time and tests assert bit-equal output.
"""

from libc.math cimport floor, ceil

import numpy as np
cimport numpy as cnp

cnp.import_array()


def fill_triangles(double[:, :, ::1] xy, double[:, ::1] z, double[:] shade,
                   double[:, ::1] image, double[:, ::1] depth):
    """Paint screen-space triangles into image/depth buffers, in place.

    xy: (T, 3, 2) pixel coordinates, z: (T, 3) depth at each corner,
    shade: (T,) flat gray value per triangle. Pixel centers are at
    (ix + 0.5, iy + 0.5); coverage test is inclusive (w >= 0); the depth
    test is strict (earlier triangles win ties).
    """
    cdef Py_ssize_t t, ix, iy, ix_min, ix_max, iy_min, iy_max
    cdef Py_ssize_t n_tri = xy.shape[0]
    cdef Py_ssize_t height = image.shape[0]
    cdef Py_ssize_t width = image.shape[1]
    cdef double x0, y0, x1, y1, x2, y2, z0, z1, z2, s
    cdef double d, w0, w1, w2, px, py, zz
    cdef double xmin, xmax, ymin, ymax

    for t in range(n_tri):
        x0 = xy[t, 0, 0]; y0 = xy[t, 0, 1]
        x1 = xy[t, 1, 0]; y1 = xy[t, 1, 1]
        x2 = xy[t, 2, 0]; y2 = xy[t, 2, 1]
        z0 = z[t, 0]; z1 = z[t, 1]; z2 = z[t, 2]
        s = shade[t]

        d = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        if d == 0.0:
            continue

        xmin = min(x0, min(x1, x2)); xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2)); ymax = max(y0, max(y1, y2))
        ix_min = <Py_ssize_t>floor(xmin - 0.5)
        ix_max = <Py_ssize_t>ceil(xmax - 0.5)
        iy_min = <Py_ssize_t>floor(ymin - 0.5)
        iy_max = <Py_ssize_t>ceil(ymax - 0.5)
        if ix_min < 0: ix_min = 0
        if iy_min < 0: iy_min = 0
        if ix_max > width - 1: ix_max = width - 1
        if iy_max > height - 1: iy_max = height - 1

        for iy in range(iy_min, iy_max + 1):
            py = iy + 0.5
            for ix in range(ix_min, ix_max + 1):
                px = ix + 0.5
                w0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / d
                w1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / d
                w2 = 1.0 - w0 - w1
                if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                    zz = (w0 * z0 + w1 * z1) + w2 * z2
                    if zz < depth[iy, ix]:
                        depth[iy, ix] = zz
                        image[iy, ix] = s
