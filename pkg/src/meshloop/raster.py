"""Z-buffered software rasterizer for dense correspondence maps.

Pixel centers sit on the align-corners lattice: pixel (ix, iy) samples
the continuous image plane at exactly (ix, iy), with (0, 0) mapping to
normalized (-1, -1). A nearer-wins depth test (smaller camera z) resolves
overlap; pixel centers exactly on a shared edge are claimed by one
triangle via a top-left fill rule. Attribute interpolation is barycentric,
affine under the weak-perspective camera and perspective-correct under
the pinhole camera.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from .camera import (PerspectiveCamera, WeakPerspectiveCamera, normalized_to_pixels,
                     project_persp, project_weak)

DEFAULT_RESOLUTION = 56

_PART_PALETTE = np.array([
    [0, 0, 0], [230, 80, 60], [70, 160, 230], [90, 200, 120], [240, 180, 50],
    [170, 110, 220], [240, 120, 190], [110, 220, 220], [160, 160, 80],
    [120, 90, 60], [200, 200, 200], [60, 60, 180], [180, 60, 120],
    [60, 140, 90], [220, 140, 100], [140, 140, 240], [100, 100, 100],
], dtype=np.uint8)


@dataclass
class RasterConfig:
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError(f"resolution must be at least 8, got {self.resolution}")


@dataclass
class DenseCorrMap:
    """Per-pixel part index (0 = background), part uv, optional pncc.

    u and v are zero wherever part_index is zero; depth holds the winning
    camera depth with +inf on background.
    """

    part_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    pncc: Optional[np.ndarray] = None
    depth: Optional[np.ndarray] = None

    def __post_init__(self):
        self.part_index = np.asarray(self.part_index, dtype=int)
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.part_index.ndim != 2:
            raise ValueError(f"part_index must be (H, W), got {self.part_index.shape}")
        if self.u.shape != self.part_index.shape or self.v.shape != self.part_index.shape:
            raise ValueError("u and v must match part_index shape")
        if self.pncc is not None:
            self.pncc = np.asarray(self.pncc, dtype=float)
            if self.pncc.shape != self.part_index.shape + (3,):
                raise ValueError(f"pncc must be (H, W, 3), got {self.pncc.shape}")
        bg = self.part_index == 0
        if np.any(self.u[bg] != 0.0) or np.any(self.v[bg] != 0.0):
            raise ValueError("u and v must be zero on background pixels")

    @property
    def foreground(self) -> np.ndarray:
        return self.part_index > 0


def _edge_accepts(e: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Half-plane test with the top-left tie rule for a CCW edge vector d."""
    if d[1] < 0.0 or (d[1] == 0.0 and d[0] > 0.0):
        return e >= 0.0
    return e > 0.0


def rasterize(vertices: np.ndarray, faces: np.ndarray, part_index: np.ndarray, uv: np.ndarray,
              cam, config: RasterConfig = RasterConfig(),
              pncc: Optional[np.ndarray] = None) -> DenseCorrMap:
    """Render per-vertex attributes into a DenseCorrMap.

    Args:
        vertices: (V, 3) camera-frame points.
        faces: (F, 3) triangle indices; a face's part id comes from its
            first vertex (toy meshes never mix parts inside a face).
        part_index: (V,) 1-based part ids.
        uv: (V, 2) per-part texture coordinates.
        cam: WeakPerspectiveCamera or PerspectiveCamera.
        pncc: optional (V, 3) normalized rest coordinates.
    """
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=int)
    part_index = np.asarray(part_index, dtype=int)
    uv = np.asarray(uv, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError(f"vertices must be (V, 3), got {vertices.shape}")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError(f"faces must be (F, 3), got {faces.shape}")
    res = config.resolution

    if isinstance(cam, WeakPerspectiveCamera):
        pts = normalized_to_pixels(project_weak(vertices, cam), res, res)
        depth = vertices[:, 2]
        persp_correct = False
    elif isinstance(cam, PerspectiveCamera):
        pts = project_persp(vertices, cam)
        depth = (vertices @ cam.rotation.T + cam.translation)[:, 2]
        persp_correct = True
    else:
        raise ValueError(f"unsupported camera type {type(cam).__name__}")

    attrs = [uv[:, 0], uv[:, 1]]
    if pncc is not None:
        pncc = np.asarray(pncc, dtype=float)
        attrs += [pncc[:, 0], pncc[:, 1], pncc[:, 2]]
    attr = np.stack(attrs, axis=-1)

    zbuf = np.full((res, res), np.inf)
    parts = np.zeros((res, res), dtype=int)
    out = np.zeros((res, res, attr.shape[1]))

    for f in faces:
        p = pts[f]
        z = depth[f]
        a = attr[f]
        area = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
        if abs(area) < 1e-12:
            continue
        if area < 0.0:
            p = p[[0, 2, 1]]
            z = z[[0, 2, 1]]
            a = a[[0, 2, 1]]
            area = -area
        x_lo = max(0, int(np.ceil(p[:, 0].min())))
        x_hi = min(res - 1, int(np.floor(p[:, 0].max())))
        y_lo = max(0, int(np.ceil(p[:, 1].min())))
        y_hi = min(res - 1, int(np.floor(p[:, 1].max())))
        if x_lo > x_hi or y_lo > y_hi:
            continue
        xs = np.arange(x_lo, x_hi + 1)
        ys = np.arange(y_lo, y_hi + 1)
        gx, gy = np.meshgrid(xs, ys)
        inside = np.ones(gx.shape, dtype=bool)
        bary = []
        for i in range(3):
            av = p[i]
            bv = p[(i + 1) % 3]
            d = bv - av
            # cross(d, pixel - a): positive on the interior side after the
            # winding normalization above
            e = d[0] * (gy - av[1]) - d[1] * (gx - av[0])
            inside &= _edge_accepts(e, d)
            bary.append(e)
        if not inside.any():
            continue
        # e_i is proportional to the barycentric weight of vertex i+2
        w2, w0, w1 = (b / area for b in bary)
        if persp_correct:
            inv_z = w0 / z[0] + w1 / z[1] + w2 / z[2]
            z_pix = 1.0 / inv_z
            a_pix = (w0[..., None] * a[0] / z[0] + w1[..., None] * a[1] / z[1]
                     + w2[..., None] * a[2] / z[2]) / inv_z[..., None]
        else:
            z_pix = w0 * z[0] + w1 * z[1] + w2 * z[2]
            a_pix = w0[..., None] * a[0] + w1[..., None] * a[1] + w2[..., None] * a[2]
        win = inside & (z_pix < zbuf[y_lo:y_hi + 1, x_lo:x_hi + 1])
        if not win.any():
            continue
        zb = zbuf[y_lo:y_hi + 1, x_lo:x_hi + 1]
        pb = parts[y_lo:y_hi + 1, x_lo:x_hi + 1]
        ob = out[y_lo:y_hi + 1, x_lo:x_hi + 1]
        zb[win] = z_pix[win]
        pb[win] = part_index[f[0]]
        ob[win] = a_pix[win]

    u = out[..., 0].copy()
    v = out[..., 1].copy()
    bg = parts == 0
    u[bg] = 0.0
    v[bg] = 0.0
    pn = None
    if pncc is not None:
        pn = out[..., 2:5].copy()
        pn[bg] = 0.0
    return DenseCorrMap(part_index=parts, u=u, v=v, pncc=pn, depth=zbuf)


def coverage_mask(vertices: np.ndarray, faces: np.ndarray, cam,
                  config: RasterConfig = RasterConfig()) -> np.ndarray:
    """Foreground mask only; same geometry rules as rasterize."""
    v = np.asarray(vertices, dtype=float)
    dummy_parts = np.ones(v.shape[0], dtype=int)
    dummy_uv = np.zeros((v.shape[0], 2))
    return rasterize(v, faces, dummy_parts, dummy_uv, cam, config).foreground


# ---------------------------------------------------------------------------
# Auxiliary dense-supervision loss


def _smooth_l1(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def _smooth_l1_grad(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def aux_loss(pred_parts: np.ndarray, pred_u: np.ndarray, pred_v: np.ndarray,
             gt: DenseCorrMap, lambda_pi: float = 1.0, lambda_uv: float = 1.0):
    """Dense supervision: part cross-entropy plus masked smooth-L1 on uv.

    Args:
        pred_parts: (C, H, W) per-class probabilities, channel 0 being
            background; values at the true class must be positive.
        pred_u, pred_v: (H, W) predicted coordinate maps.
        gt: ground-truth DenseCorrMap; its foreground masks the uv terms,
            so background pixels contribute exactly zero there.

    Returns:
        (loss, grads) with grads for pred_parts, pred_u and pred_v.
    """
    pred_parts = np.asarray(pred_parts, dtype=float)
    pred_u = np.asarray(pred_u, dtype=float)
    pred_v = np.asarray(pred_v, dtype=float)
    h, w = gt.part_index.shape
    if pred_parts.ndim != 3 or pred_parts.shape[1:] != (h, w):
        raise ValueError(f"pred_parts must be (C, {h}, {w}), got {pred_parts.shape}")
    if pred_parts.shape[0] <= gt.part_index.max():
        raise ValueError("pred_parts has fewer classes than the ground truth uses")
    if pred_u.shape != (h, w) or pred_v.shape != (h, w):
        raise ValueError("pred_u / pred_v must match the ground-truth resolution")

    n = h * w
    yy, xx = np.mgrid[0:h, 0:w]
    p_true = pred_parts[gt.part_index, yy, xx]
    if np.any(p_true <= 0.0):
        raise ValueError("predicted probability at the true class must be positive")
    ce = -np.log(p_true).sum() / n

    # np.where keeps background entries at exact +0.0; a float mask multiply
    # would leak -0.0 and break bitwise reproducibility
    fg = gt.foreground
    du = np.where(fg, pred_u - gt.u, 0.0)
    dv = np.where(fg, pred_v - gt.v, 0.0)
    sl_u = _smooth_l1(du).sum() / n
    sl_v = _smooth_l1(dv).sum() / n

    loss = lambda_pi * ce + lambda_uv * (sl_u + sl_v)

    g_parts = np.zeros_like(pred_parts)
    g_parts[gt.part_index, yy, xx] = -lambda_pi / (n * p_true)
    g_u = np.where(fg, lambda_uv * _smooth_l1_grad(du) / n, 0.0)
    g_v = np.where(fg, lambda_uv * _smooth_l1_grad(dv) / n, 0.0)
    return float(loss), {"parts": g_parts, "u": g_u, "v": g_v}


# ---------------------------------------------------------------------------
# PNG export


def save_part_png(part_index: np.ndarray, path) -> None:
    """Palette PNG of the part map (index = palette entry)."""
    part_index = np.asarray(part_index, dtype=int)
    if part_index.max() >= len(_PART_PALETTE):
        raise ValueError(f"part palette supports up to {len(_PART_PALETTE) - 1} parts")
    img = Image.fromarray(part_index.astype(np.uint8), mode="P")
    img.putpalette(_PART_PALETTE.ravel().tolist() + [0] * (768 - _PART_PALETTE.size))
    img.save(path, format="PNG")


def save_scalar_png16(values: np.ndarray, path) -> None:
    """16-bit grayscale PNG of a [0, 1] scalar map."""
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    img = Image.fromarray(np.round(values * 65535.0).astype(np.uint16))
    img.save(path, format="PNG")


def save_rgb_png(values: np.ndarray, path) -> None:
    """8-bit RGB PNG of a [0, 1] (H, W, 3) map."""
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    img = Image.fromarray(np.round(values * 255.0).astype(np.uint8), mode="RGB")
    img.save(path, format="PNG")


def export_map_pngs(m: DenseCorrMap, prefix: str) -> list:
    """Write parts / u / v (and pncc when present) PNGs; returns paths."""
    paths = [f"{prefix}_parts.png", f"{prefix}_u.png", f"{prefix}_v.png"]
    save_part_png(m.part_index, paths[0])
    save_scalar_png16(m.u, paths[1])
    save_scalar_png16(m.v, paths[2])
    if m.pncc is not None:
        paths.append(f"{prefix}_pncc.png")
        save_rgb_png(m.pncc, paths[3])
    return paths
