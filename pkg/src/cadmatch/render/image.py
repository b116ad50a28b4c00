"""Image and view-set containers with PNG / float binary persistence."""

import numpy as np

from ..errors import ShapeError, ValidationError

__all__ = ["Image", "ViewSet", "save_png", "load_png", "save_viewset", "load_viewset"]


class Image:
    """Single-channel (H, W) or multi-channel (H, W, C) float image in [0, 1].

    ``blank`` marks a render in which no geometry reached the framebuffer.
    ``mask`` is an optional (H, W) bool foreground map (True where geometry
    covered the pixel); renders carry it so augmentation can repaint the
    random background without touching the object.
    """

    def __init__(self, data, blank=False, mask=None):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim == 2:
            self.channels = 1
        elif data.ndim == 3:
            self.channels = data.shape[2]
        else:
            raise ShapeError(f"image data must be 2-D or 3-D, got shape {data.shape}")
        self.data = data
        self.height, self.width = data.shape[:2]
        self.blank = bool(blank)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != data.shape[:2]:
                raise ShapeError(
                    f"mask shape {mask.shape} does not match image {data.shape[:2]}"
                )
        self.mask = mask
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValidationError("image values must lie in [0, 1]")

    def __repr__(self):
        return f"Image({self.width}x{self.height}x{self.channels}, blank={self.blank})"


class ViewSet:
    """Ordered renders of one model; all images must share a shape."""

    def __init__(self, images, model_id=""):
        images = list(images)
        if not images:
            raise ValidationError("a view set needs at least one image")
        shape = images[0].data.shape
        for img in images[1:]:
            if img.data.shape != shape:
                raise ShapeError(
                    f"mixed view shapes: {img.data.shape} vs {shape}"
                )
        self.images = images
        self.model_id = model_id

    def __len__(self):
        return len(self.images)

    def as_array(self):
        """(K, H, W) float32 stack."""
        return np.stack([img.data for img in self.images])

    def masks_array(self):
        """(K, H, W) bool stack, or None when any view lacks a mask."""
        if any(img.mask is None for img in self.images):
            return None
        return np.stack([img.mask for img in self.images])


def save_png(image, path):
    from PIL import Image as PILImage

    data = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if image.channels == 1 else "RGB"
    PILImage.fromarray(data, mode=mode).save(path)


def load_png(path):
    from PIL import Image as PILImage

    with PILImage.open(path) as img:
        data = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return Image(data)


def save_viewset(viewset, path):
    payload = {"views": viewset.as_array(), "model_id": np.str_(viewset.model_id)}
    masks = viewset.masks_array()
    if masks is not None:
        payload["masks"] = masks
    np.savez(path, **payload)


def load_viewset(path):
    with np.load(path) as blob:
        views = blob["views"]
        model_id = str(blob["model_id"])
        masks = blob["masks"] if "masks" in blob else [None] * len(views)
    return ViewSet(
        [Image(v, mask=m) for v, m in zip(views, masks)], model_id=model_id
    )
