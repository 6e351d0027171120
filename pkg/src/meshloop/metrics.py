"""Evaluation metrics: mean point errors, Procrustes alignment, OKS.

All functions are unit-agnostic; callers writing millimeter reports
multiply meter-valued results by 1000 themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _paired(pred: np.ndarray, gt: np.ndarray, dim: int) -> tuple:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.ndim != 2 or pred.shape[1] != dim:
        raise ValueError(f"expected (N, {dim}) arrays, got {pred.shape}")
    if pred.shape[0] == 0:
        raise ValueError("need at least one point")
    return pred, gt


def mpjpe(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean Euclidean joint error over matched (N, 3) sets."""
    pred, gt = _paired(pred, gt, 3)
    return float(np.linalg.norm(pred - gt, axis=1).mean())


def pve(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-vertex Euclidean error; same formula as mpjpe, kept
    separate so reports name the quantity they actually measured."""
    return mpjpe(pred, gt)


@dataclass
class AlignmentResult:
    """Similarity transform pred -> gt: x |-> scale * R x + translation."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray
    residual_rmse: float


def procrustes(pred: np.ndarray, gt: np.ndarray) -> AlignmentResult:
    """Least-squares similarity alignment (rotation, scale, translation).

    The rotation is forced into SO(3): when the best orthogonal map is a
    reflection, the smallest singular direction is flipped. Raises on
    fewer than 3 points or a rank-deficient (collinear) configuration.
    """
    pred, gt = _paired(pred, gt, 3)
    n = pred.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    x = pred - mu_p
    y = gt - mu_g
    sing = np.linalg.svd(x, compute_uv=False)
    if sing[1] < 1e-12 * max(1.0, sing[0]):
        raise ValueError("rank-deficient configuration: points are collinear")
    cov = y.T @ x / n
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(3)
    if np.linalg.det(u @ vt) < 0.0:
        s[-1] = -1.0
    rotation = u @ np.diag(s) @ vt
    var_p = (x * x).sum() / n
    scale = float((d * s).sum() / var_p)
    translation = mu_g - scale * rotation @ mu_p
    aligned = scale * pred @ rotation.T + translation
    residual = float(np.sqrt(((aligned - gt) ** 2).sum(axis=1).mean()))
    return AlignmentResult(rotation=rotation, scale=scale, translation=translation,
                           residual_rmse=residual)


def apply_alignment(points: np.ndarray, alignment: AlignmentResult) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return alignment.scale * points @ alignment.rotation.T + alignment.translation


def pa_mpjpe(pred: np.ndarray, gt: np.ndarray) -> float:
    """mpjpe after Procrustes alignment of pred onto gt."""
    return mpjpe(apply_alignment(pred, procrustes(pred, gt)), gt)


def pa_pve(pred: np.ndarray, gt: np.ndarray) -> float:
    return pa_mpjpe(pred, gt)


def oks(pred: np.ndarray, gt: np.ndarray, scale: float, sigmas: np.ndarray,
        labeled=None) -> float:
    """Object keypoint similarity, averaged over labeled keypoints.

    score_i = exp(-d_i^2 / (2 * scale^2 * sigma_i^2)).
    """
    pred, gt = _paired(pred, gt, 2)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.shape != (pred.shape[0],):
        raise ValueError(f"sigmas must be ({pred.shape[0]},), got {sigmas.shape}")
    if not scale > 0.0 or np.any(sigmas <= 0.0):
        raise ValueError("scale and sigmas must be positive")
    mask = np.ones(pred.shape[0], dtype=bool) if labeled is None else np.asarray(labeled, dtype=bool)
    if mask.shape != (pred.shape[0],):
        raise ValueError(f"labeled mask must be ({pred.shape[0]},), got {mask.shape}")
    if not mask.any():
        raise ValueError("no labeled keypoints")
    d2 = ((pred - gt) ** 2).sum(axis=1)
    score = np.exp(-d2 / (2.0 * scale * scale * sigmas * sigmas))
    return float(score[mask].mean())
