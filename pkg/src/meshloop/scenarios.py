"""Synthetic inference scenarios with known ground truth.

A scenario is a seeded ground-truth parameter draw plus a feature pyramid
that procedurally encodes the rendered dense-correspondence maps of that
ground truth. The pyramid therefore carries real alignment signal: a
mesh estimate matching the ground truth samples the same part/uv/pncc
values its own surface would render to. Additive seeded noise keeps the
regression task from being trivially invertible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .camera import WeakPerspectiveCamera
from .feedback import encode_params
from .integration import FullBodyParams
from .kinematics import ArticulatedModel, ModelParams, pose_mesh
from .raster import DenseCorrMap, RasterConfig, rasterize
from .rotations import axis_angle_to_matrix
from .sampling import DEFAULT_RESOLUTIONS, FeatureMap, FeaturePyramid, box_downsample

N_FEATURE_CHANNELS = 15
N_RAW_CHANNELS = 7
DEFAULT_NOISE = 0.01
DEFAULT_POSE_SIGMA = 0.03
DEFAULT_ORIENT_SIGMA = 0.2
DEFAULT_SHAPE_SIGMA = 0.25
DEFAULT_CAMERA_SCALE = 0.9
DEFAULT_CAMERA_SIGMA = 0.08


@dataclass
class Scenario:
    """Seeded ground truth plus its synthesized observation pyramid."""

    seed: int
    gt_params: ModelParams
    gt_vector: np.ndarray
    pyramid: FeaturePyramid
    camera: WeakPerspectiveCamera
    gt_fullbody: Optional[FullBodyParams] = None


def random_params(model: ArticulatedModel, rng: np.random.Generator,
                  pose_sigma: float = DEFAULT_POSE_SIGMA,
                  orient_sigma: float = DEFAULT_ORIENT_SIGMA,
                  shape_sigma: float = DEFAULT_SHAPE_SIGMA,
                  camera_scale: float = DEFAULT_CAMERA_SCALE,
                  camera_sigma: float = DEFAULT_CAMERA_SIGMA) -> ModelParams:
    """Draw ground-truth parameters around the mean pose."""
    aa = rng.normal(scale=pose_sigma, size=(model.n_joints, 3))
    aa[0] = rng.normal(scale=orient_sigma, size=3)
    theta = axis_angle_to_matrix(aa)
    beta = rng.normal(scale=shape_sigma, size=model.n_shape)
    scale = camera_scale * np.exp(rng.normal(scale=camera_sigma))
    translation = rng.normal(scale=camera_sigma, size=2)
    cam = WeakPerspectiveCamera(scale=float(scale), translation=translation)
    return ModelParams(theta=theta, beta=beta, camera=cam)


def encode_correspondence(m: DenseCorrMap, n_parts: int) -> np.ndarray:
    """Stack a rendered map into the fixed 15-channel feature layout.

    The first seven channels are the raw render: foreground mask, u, v,
    pncc xyz, part id over n_parts. The rest are blurred copies at three
    widths (mask; u, v and part at the two finer ones) so that points
    sampling near or off the silhouette still read a smooth, pose-
    dependent signal at several spatial scales; a learned encoder's
    receptive fields would provide the same.
    """
    if n_parts < 1:
        raise ValueError("n_parts must be positive")
    if m.pncc is None:
        raise ValueError("the encoding needs a map rendered with pncc attributes")
    fg = m.foreground.astype(float)
    part = m.part_index.astype(float) / float(n_parts)
    s1 = 0.03 * fg.shape[0]
    s2 = 0.10 * fg.shape[0]
    s3 = 0.20 * fg.shape[0]
    blur = lambda plane, s: gaussian_filter(plane, s, mode="constant")
    planes = [fg, m.u, m.v,
              m.pncc[..., 0], m.pncc[..., 1], m.pncc[..., 2], part,
              blur(fg, s1), blur(fg, s2), blur(fg, s3),
              blur(m.u, s1), blur(m.u, s2),
              blur(m.v, s1), blur(m.v, s2),
              blur(part, s2)]
    return np.stack(planes, axis=0)


def synthesize_pyramid(model: ArticulatedModel, params: ModelParams,
                       rng: np.random.Generator,
                       resolutions: Sequence[int] = DEFAULT_RESOLUTIONS,
                       noise=DEFAULT_NOISE) -> FeaturePyramid:
    """Render the ground truth once at full resolution, then box-average
    down to every pyramid level and add seeded noise, coarse to fine.

    noise is a scalar or one value per level; the default keeps coarse
    levels noisy (good only for large corrections) and fine levels crisp.
    """
    resolutions = tuple(int(r) for r in resolutions)
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("resolutions must strictly increase")
    top = resolutions[-1]
    if any(top % r for r in resolutions):
        raise ValueError(f"every level must divide the top resolution {top}")
    sigmas = np.broadcast_to(np.asarray(noise, dtype=float), (len(resolutions),))
    posed = pose_mesh(model, params)
    rendered = rasterize(posed.vertices, model.faces, model.part_index, model.uv,
                         params.camera, RasterConfig(resolution=top), pncc=model.pncc)
    base = encode_correspondence(rendered, int(model.part_index.max()))
    levels = []
    for r, sigma in zip(resolutions, sigmas):
        lv = base if r == top else box_downsample(base, top // r)
        if sigma > 0.0:
            lv = lv + rng.normal(scale=sigma, size=lv.shape)
        levels.append(FeatureMap(lv))
    return FeaturePyramid(levels)


def make_scenario(model: ArticulatedModel, seed: int,
                  resolutions: Sequence[int] = DEFAULT_RESOLUTIONS,
                  noise: float = DEFAULT_NOISE,
                  pose_sigma: float = DEFAULT_POSE_SIGMA,
                  orient_sigma: float = DEFAULT_ORIENT_SIGMA,
                  shape_sigma: float = DEFAULT_SHAPE_SIGMA,
                  camera_scale: float = DEFAULT_CAMERA_SCALE,
                  camera_sigma: float = DEFAULT_CAMERA_SIGMA) -> Scenario:
    """Fully reproducible scenario: all randomness flows from the seed."""
    rng = np.random.default_rng(seed)
    params = random_params(model, rng, pose_sigma=pose_sigma,
                           orient_sigma=orient_sigma, shape_sigma=shape_sigma,
                           camera_scale=camera_scale, camera_sigma=camera_sigma)
    pyramid = synthesize_pyramid(model, params, rng, resolutions=resolutions, noise=noise)
    cam_vec = np.array([params.camera.scale, params.camera.translation[0],
                        params.camera.translation[1]])
    gt_vector = encode_params(params.theta, params.beta, cam_vec)
    return Scenario(seed=seed, gt_params=params, gt_vector=gt_vector,
                    pyramid=pyramid, camera=params.camera)


def make_scenarios(model: ArticulatedModel, n: int, base_seed: int = 0, **kwargs):
    """n scenarios with consecutive seeds starting at base_seed."""
    return [make_scenario(model, base_seed + i, **kwargs) for i in range(n)]


def truncate_channels(scenario: Scenario, count: int = N_RAW_CHANNELS) -> Scenario:
    """Scenario with only the first count feature channels kept.

    count=7 strips the blurred planes, leaving the raw render channels;
    useful for probing how much the smooth off-silhouette signal carries.
    """
    if not 1 <= count <= scenario.pyramid[0].channels:
        raise ValueError(f"count must be in [1, {scenario.pyramid[0].channels}], got {count}")
    pyramid = FeaturePyramid([lv.data[:count] for lv in scenario.pyramid.levels])
    return Scenario(seed=scenario.seed, gt_params=scenario.gt_params,
                    gt_vector=scenario.gt_vector, pyramid=pyramid,
                    camera=scenario.camera, gt_fullbody=scenario.gt_fullbody)
