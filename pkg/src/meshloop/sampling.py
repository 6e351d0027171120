"""Feature pyramids and point-wise feature extraction.

Sampling coordinates live in the normalized [-1, 1] frame shared with the
weak-perspective camera. Bilinear lookup uses align-corners semantics and
clamps out-of-range coordinates to the border.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .camera import WeakPerspectiveCamera, project_weak

DEFAULT_GRID_SIZE = 21
DEFAULT_REDUCE_DIM = 5
DEFAULT_RESOLUTIONS = (14, 28, 56)

SOURCE_GRID = "grid"
SOURCE_MESH = "mesh"


@dataclass
class FeatureMap:
    """A single (C, H, W) feature plane."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3:
            raise ValueError(f"feature map must be (C, H, W), got shape {self.data.shape}")
        if self.data.shape[1] < 2 or self.data.shape[2] < 2:
            raise ValueError(f"feature map needs H, W >= 2, got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class FeaturePyramid:
    """Coarse-to-fine stack of feature maps, strictly increasing resolution."""

    levels: list

    def __post_init__(self):
        if len(self.levels) == 0:
            raise ValueError("pyramid needs at least one level")
        self.levels = [lv if isinstance(lv, FeatureMap) else FeatureMap(lv) for lv in self.levels]
        for lo, hi in zip(self.levels, self.levels[1:]):
            if not (hi.height > lo.height and hi.width > lo.width):
                raise ValueError("pyramid levels must strictly increase in resolution")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> FeatureMap:
        return self.levels[i]


@dataclass
class PointSet:
    """2D sampling locations plus where they came from."""

    points: np.ndarray
    source: str = SOURCE_MESH

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"points must be (P, 2), got {self.points.shape}")
        if self.source not in (SOURCE_GRID, SOURCE_MESH):
            raise ValueError(f"unknown point source {self.source!r}")

    def __len__(self) -> int:
        return self.points.shape[0]


def grid_points(n: int = DEFAULT_GRID_SIZE) -> PointSet:
    """The n x n lattice over [-1, 1]^2, row-major with x varying fastest."""
    if n < 2:
        raise ValueError(f"grid size must be at least 2, got {n}")
    ticks = np.linspace(-1.0, 1.0, n)
    xs, ys = np.meshgrid(ticks, ticks)
    return PointSet(np.stack([xs.ravel(), ys.ravel()], axis=-1), source=SOURCE_GRID)


def mesh_aligned_points(mesh_reduced: np.ndarray, cam: WeakPerspectiveCamera) -> PointSet:
    """Project downsampled mesh vertices into the normalized image frame."""
    pts = project_weak(mesh_reduced, cam)
    return PointSet(pts, source=SOURCE_MESH)


def bilinear_sample(fm: FeatureMap, pts) -> np.ndarray:
    """Sample a feature map at normalized locations, (P, C) out.

    Align-corners: (-1, -1) hits pixel center (0, 0), (1, 1) hits
    (W - 1, H - 1). Coordinates outside [-1, 1] clamp to the border.
    """
    if not isinstance(fm, FeatureMap):
        fm = FeatureMap(fm)
    p = pts.points if isinstance(pts, PointSet) else np.asarray(pts, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"points must be (P, 2), got {p.shape}")
    out = _bilinear_many(fm.data[None], p[None])
    return out[0]


def _bilinear_many(maps: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Batched core: maps (B, C, H, W), pts (B, P, 2) -> (B, P, C)."""
    b, c, h, w = maps.shape
    px = np.clip((pts[..., 0] + 1.0) * 0.5 * (w - 1), 0.0, w - 1.0)
    py = np.clip((pts[..., 1] + 1.0) * 0.5 * (h - 1), 0.0, h - 1.0)
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (px - x0)[..., None]
    fy = (py - y0)[..., None]
    bi = np.arange(b)[:, None]
    flat = maps.reshape(b, c, h * w)
    # advanced indices split by the channel slice: result comes out (B, P, C)
    g = lambda yy, xx: flat[bi, :, yy * w + xx]
    top = g(y0, x0) * (1.0 - fx) + g(y0, x1) * fx
    bot = g(y1, x0) * (1.0 - fx) + g(y1, x1) * fx
    return top * (1.0 - fy) + bot * fy


def reduce_and_concat(point_feats: np.ndarray, reducer: Callable | None = None) -> np.ndarray:
    """Apply a per-point reducer and flatten to one feature vector.

    `reducer` maps (P, C) -> (P, d); None keeps the features as-is.
    Point order is preserved in the flattened output.
    """
    point_feats = np.asarray(point_feats, dtype=float)
    if point_feats.ndim != 2:
        raise ValueError(f"point features must be (P, C), got {point_feats.shape}")
    reduced = point_feats if reducer is None else np.asarray(reducer(point_feats), dtype=float)
    if reduced.ndim != 2 or reduced.shape[0] != point_feats.shape[0]:
        raise ValueError(f"reducer must keep the point count, got {reduced.shape}")
    return reduced.reshape(-1)


def box_downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Average-pool (C, H, W) by an integer factor; H and W must divide."""
    image = np.asarray(image, dtype=float)
    c, h, w = image.shape
    if h % factor or w % factor:
        raise ValueError(f"resolution {h}x{w} not divisible by {factor}")
    return image.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))
