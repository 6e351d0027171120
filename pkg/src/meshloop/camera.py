"""Camera models and 2D point utilities.

The weak-perspective camera works in a normalized image frame where both
axes span [-1, 1]. The pinhole camera works in pixels. The align-corners
pixel mapping sends (-1, -1) to pixel center (0, 0) and (1, 1) to
(W - 1, H - 1), matching the feature sampler and the rasterizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_FOCAL = 5000.0
DEFAULT_IMAGE_SIZE = 224


@dataclass
class WeakPerspectiveCamera:
    """Orthographic scale + in-plane shift; depth is ignored.

    `focal` and `image_size` are carried along so a render target can
    recover the matching pinhole setup; projection itself uses only
    scale and translation.
    """

    scale: float = 1.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    focal: float = DEFAULT_FOCAL
    image_size: int = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float).reshape(2)
        if not self.scale > 0.0:
            raise ValueError(f"camera scale must be positive, got {self.scale}")


@dataclass
class PerspectiveCamera:
    """Pinhole camera: x_cam = R x + t, pixels = focal * (x/z, y/z) + pp."""

    focal: np.ndarray = field(default_factory=lambda: np.array([DEFAULT_FOCAL, DEFAULT_FOCAL]))
    principal_point: np.ndarray = field(default_factory=lambda: np.zeros(2))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    min_depth: float = 1e-6

    def __post_init__(self):
        self.focal = np.asarray(self.focal, dtype=float).reshape(2)
        self.principal_point = np.asarray(self.principal_point, dtype=float).reshape(2)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)


def project_weak(points: np.ndarray, cam: WeakPerspectiveCamera) -> np.ndarray:
    """Project (..., 3) points to the normalized [-1, 1] image frame."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != 3:
        raise ValueError(f"points must be (..., 3), got {points.shape}")
    return cam.scale * points[..., :2] + cam.translation


def camera_depth(points: np.ndarray, cam: WeakPerspectiveCamera) -> np.ndarray:
    """Depth ordering value under the weak-perspective model (raw z)."""
    points = np.asarray(points, dtype=float)
    return points[..., 2]


def project_persp(points: np.ndarray, cam: PerspectiveCamera) -> np.ndarray:
    """Project (..., 3) world points to pixel coordinates.

    Raises ValueError when any point lands at or behind the near plane.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != 3:
        raise ValueError(f"points must be (..., 3), got {points.shape}")
    x = points @ cam.rotation.T + cam.translation
    z = x[..., 2]
    if np.any(z <= cam.min_depth):
        raise ValueError("point at or behind the camera near plane")
    return cam.focal * x[..., :2] / z[..., None] + cam.principal_point


def recenter(points2d: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Shift projected points so their centroid sits at `center`.

    Used to move a part's projection (hand, face) into its own crop frame
    before feature sampling.
    """
    points2d = np.asarray(points2d, dtype=float)
    center = np.asarray(center, dtype=float).reshape(2)
    return points2d - points2d.mean(axis=-2, keepdims=True) + center


def normalized_to_pixels(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Map normalized [-1, 1] coordinates to pixel centers, align-corners."""
    points = np.asarray(points, dtype=float)
    px = (points[..., 0] + 1.0) * 0.5 * (width - 1)
    py = (points[..., 1] + 1.0) * 0.5 * (height - 1)
    return np.stack([px, py], axis=-1)


def pixels_to_normalized(points: np.ndarray, width: int, height: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    x = points[..., 0] / (width - 1) * 2.0 - 1.0
    y = points[..., 1] / (height - 1) * 2.0 - 1.0
    return np.stack([x, y], axis=-1)
