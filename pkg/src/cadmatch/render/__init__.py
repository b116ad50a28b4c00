"""Multi-view mesh rendering and image augmentation."""

from .augment import AugmentParams, apply_affine, augment
from .backend import available_backends, default_backend, get_kernel
from .camera import CameraPose, ring_cameras
from .image import (
    Image,
    ViewSet,
    load_png,
    load_viewset,
    save_png,
    save_viewset,
)
from .rasterizer import RenderConfig, rasterize_mesh, render_view, render_views

__all__ = [
    "AugmentParams",
    "CameraPose",
    "Image",
    "RenderConfig",
    "ViewSet",
    "apply_affine",
    "augment",
    "available_backends",
    "default_backend",
    "get_kernel",
    "load_png",
    "load_viewset",
    "rasterize_mesh",
    "render_view",
    "render_views",
    "ring_cameras",
    "save_png",
    "save_viewset",
]
