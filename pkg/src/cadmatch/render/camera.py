"""Camera poses on a ring around the object."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

__all__ = ["CameraPose", "ring_cameras"]


@dataclass
class CameraPose:
    position: tuple
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 0.0, 1.0)
    fov_deg: float = 40.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        target = np.asarray(self.look_at, dtype=np.float64)
        if np.allclose(pos, target):
            raise ValidationError("camera position must differ from look_at")
        forward = target - pos
        forward = forward / np.linalg.norm(forward)
        up = np.asarray(self.up, dtype=np.float64)
        up = up / np.linalg.norm(up)
        if np.linalg.norm(np.cross(forward, up)) < 1e-9:
            raise ValidationError("up vector is parallel to the view direction")

    def basis(self):
        """(right, true_up, forward) orthonormal view basis."""
        pos = np.asarray(self.position, dtype=np.float64)
        forward = np.asarray(self.look_at, dtype=np.float64) - pos
        forward = forward / np.linalg.norm(forward)
        up = np.asarray(self.up, dtype=np.float64)
        right = np.cross(forward, up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return right, true_up, forward


def ring_cameras(k, radius, elevation_deg=0.0, fov_deg=40.0):
    """k cameras equally spaced in azimuth, all at distance ``radius`` from
    the origin and looking at it. Elevation tilts the ring off the horizontal
    plane while keeping ||position|| = radius."""
    if k < 1:
        raise ValidationError(f"view count must be >= 1, got {k}")
    if radius <= 0:
        raise ValidationError(f"ring radius must be positive, got {radius}")
    elev = np.radians(elevation_deg)
    poses = []
    for i in range(k):
        azimuth = 2.0 * np.pi * i / k
        poses.append(
            CameraPose(
                position=(
                    radius * np.cos(azimuth) * np.cos(elev),
                    radius * np.sin(azimuth) * np.cos(elev),
                    radius * np.sin(elev),
                ),
                fov_deg=fov_deg,
            )
        )
    return poses
