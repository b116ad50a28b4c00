"""Training-time image augmentation: rotation, shift, zoom, flips.

Sampling order inside ``augment`` is fixed so a seed fully determines the
transform regardless of which ranges are enabled.
"""

from dataclasses import dataclass

import numpy as np

from .image import Image

__all__ = ["AugmentParams", "apply_affine", "augment"]


@dataclass
class AugmentParams:
    rotation_range_deg: float = 20.0
    shift_range: float = 0.2
    zoom_range: float = 0.2
    flip_horizontal: bool = True
    flip_vertical: bool = True
    # repaint the background with a fresh random gray each draw; needs the
    # image to carry a foreground mask, otherwise it is a no-op
    refresh_background: bool = True


def apply_affine(data, theta_deg=0.0, shift_x=0.0, shift_y=0.0, zoom=1.0,
                 flip_h=False, flip_v=False):
    """Warp a (H, W) or (H, W, C) array about its center.

    Inverse-mapped bilinear resampling; source coordinates are clamped to the
    frame so out-of-frame pixels repeat the nearest edge value.
    """
    data = np.asarray(data)
    if zoom <= 0:
        raise ValueError(f"zoom must be positive, got {zoom}")
    h, w = data.shape[0], data.shape[1]
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    yy, xx = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
        indexing="ij",
    )
    x = xx - cx - shift_x * w
    y = yy - cy - shift_y * h
    ang = np.radians(theta_deg)
    c, s = np.cos(ang), np.sin(ang)
    xs = (c * x + s * y) / zoom
    ys = (c * y - s * x) / zoom
    if flip_h:
        xs = -xs
    if flip_v:
        ys = -ys
    xs = np.clip(xs + cx, 0.0, float(w - 1))
    ys = np.clip(ys + cy, 0.0, float(h - 1))

    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0).astype(data.dtype if data.dtype.kind == "f" else np.float64)
    fy = (ys - y0).astype(fx.dtype)
    if data.ndim == 3:
        fx = fx[:, :, None]
        fy = fy[:, :, None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return (top * (1.0 - fy) + bot * fy).astype(data.dtype)


def augment(img, params, seed):
    """One random augmentation of an Image, deterministic per seed."""
    rng = np.random.default_rng(seed)
    r = params.rotation_range_deg
    theta = rng.uniform(-r, r)
    shift_x = rng.uniform(-params.shift_range, params.shift_range)
    shift_y = rng.uniform(-params.shift_range, params.shift_range)
    zoom = rng.uniform(1.0 - params.zoom_range, 1.0 + params.zoom_range)
    # always consume two draws so the stream does not depend on the flags
    flip_h = params.flip_horizontal and rng.uniform() < 0.5
    flip_v = params.flip_vertical and rng.uniform() < 0.5
    background = rng.uniform(0.0, 1.0) if params.refresh_background else None

    identity = (theta == 0.0 and shift_x == 0.0 and shift_y == 0.0
                and zoom == 1.0 and not flip_h and not flip_v)
    if identity:
        out, mask = img.data.copy(), img.mask
    else:
        out = np.clip(
            apply_affine(img.data, theta, shift_x, shift_y, zoom, flip_h, flip_v),
            0.0, 1.0,
        )
        mask = img.mask
        if mask is not None:
            mask = apply_affine(
                mask.astype(np.float32), theta, shift_x, shift_y, zoom,
                flip_h, flip_v,
            ) >= 0.5
    if background is not None and mask is not None:
        where = mask if out.ndim == 2 else mask[:, :, None]
        out = np.where(where, out, np.float32(background))
    return Image(out, blank=img.blank, mask=mask)
