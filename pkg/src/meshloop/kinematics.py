"""Articulated models: kinematic trees, shape blending, FK, skinning.

Shapes follow the usual conventions: V vertices, J joints, F faces.
All heavy ops accept leading batch dimensions on the per-instance inputs
(rotations, coefficients, vertices); the model itself is shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .camera import WeakPerspectiveCamera

_TOL = 1e-9


@dataclass
class KinematicTree:
    """Parent indices (root parent is -1) plus joint names.

    Joints are topologically ordered: every parent index is smaller than
    its child, which lets FK run as a single forward sweep.
    """

    parents: np.ndarray
    names: list

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=int)
        if self.parents.ndim != 1:
            raise ValueError(f"parents must be 1-D, got shape {self.parents.shape}")
        if len(self.names) != len(self.parents):
            raise ValueError("names and parents disagree in length")
        if self.parents[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for j, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < j:
                raise ValueError(f"joint {j} has parent {p}; need 0 <= parent < joint")
        if len(set(self.names)) != len(self.names):
            raise ValueError("joint names must be unique")

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no joint named {name!r}") from None

    def children(self, j: int) -> np.ndarray:
        return np.nonzero(self.parents == j)[0]

    def ancestors(self, j: int) -> list:
        """Indices from the root down to and including j."""
        chain = [j]
        while self.parents[chain[-1]] != -1:
            chain.append(int(self.parents[chain[-1]]))
        return chain[::-1]


@dataclass
class ArticulatedModel:
    """Template mesh, skeleton, skinning data and per-vertex attributes.

    joint_regressor rows and skin_weights rows are convex combinations;
    downsample_matrix is a sparse row-stochastic (V_d, V) selector blend.
    part_index is 1-based (0 means background in rendered maps), uv lives
    in [0, 1]^2 per part and pncc is the normalized rest position.
    """

    template_vertices: np.ndarray
    faces: np.ndarray
    tree: KinematicTree
    joint_regressor: np.ndarray
    skin_weights: np.ndarray
    shape_blendshapes: np.ndarray
    expression_blendshapes: np.ndarray
    part_index: np.ndarray
    uv: np.ndarray
    pncc: np.ndarray
    downsample_matrix: sp.csr_matrix
    kind: str = "body"

    def __post_init__(self):
        self.template_vertices = np.asarray(self.template_vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=int)
        self.joint_regressor = np.asarray(self.joint_regressor, dtype=float)
        self.skin_weights = np.asarray(self.skin_weights, dtype=float)
        self.shape_blendshapes = np.asarray(self.shape_blendshapes, dtype=float)
        self.expression_blendshapes = np.asarray(self.expression_blendshapes, dtype=float)
        self.part_index = np.asarray(self.part_index, dtype=int)
        self.uv = np.asarray(self.uv, dtype=float)
        self.pncc = np.asarray(self.pncc, dtype=float)
        if not sp.issparse(self.downsample_matrix):
            self.downsample_matrix = sp.csr_matrix(np.asarray(self.downsample_matrix, dtype=float))
        else:
            self.downsample_matrix = self.downsample_matrix.tocsr()
        self.validate()

    @property
    def n_vertices(self) -> int:
        return self.template_vertices.shape[0]

    @property
    def n_joints(self) -> int:
        return self.tree.n_joints

    @property
    def n_shape(self) -> int:
        return self.shape_blendshapes.shape[0]

    @property
    def n_expression(self) -> int:
        return self.expression_blendshapes.shape[0]

    @property
    def n_reduced(self) -> int:
        return self.downsample_matrix.shape[0]

    @property
    def n_parts(self) -> int:
        return int(self.part_index.max())

    def downsample_dense(self) -> np.ndarray:
        cached = self.__dict__.get("_downsample_dense")
        if cached is None:
            cached = self.downsample_matrix.toarray()
            self.__dict__["_downsample_dense"] = cached
        return cached

    def validate(self) -> None:
        v, j = self.n_vertices, self.n_joints
        if self.template_vertices.shape != (v, 3):
            raise ValueError(f"template_vertices must be (V, 3), got {self.template_vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {self.faces.shape}")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= v):
            raise ValueError("face indices out of vertex range")
        if self.joint_regressor.shape != (j, v):
            raise ValueError(f"joint_regressor must be (J, V) = ({j}, {v}), got {self.joint_regressor.shape}")
        if self.skin_weights.shape != (v, j):
            raise ValueError(f"skin_weights must be (V, J) = ({v}, {j}), got {self.skin_weights.shape}")
        for name, m in (("joint_regressor", self.joint_regressor), ("skin_weights", self.skin_weights)):
            if m.min() < -_TOL:
                raise ValueError(f"{name} has negative entries")
            if np.abs(m.sum(axis=1) - 1.0).max() > 1e-6:
                raise ValueError(f"{name} rows must sum to 1")
        for name, b in (("shape_blendshapes", self.shape_blendshapes), ("expression_blendshapes", self.expression_blendshapes)):
            if b.ndim != 3 or b.shape[1:] != (v, 3):
                raise ValueError(f"{name} must be (B, V, 3), got {b.shape}")
        if self.part_index.shape != (v,) or self.part_index.min() < 1:
            raise ValueError("part_index must be (V,) with 1-based entries")
        if self.uv.shape != (v, 2) or self.uv.min() < -_TOL or self.uv.max() > 1.0 + _TOL:
            raise ValueError("uv must be (V, 2) inside [0, 1]")
        if self.pncc.shape != (v, 3) or self.pncc.min() < -_TOL or self.pncc.max() > 1.0 + _TOL:
            raise ValueError("pncc must be (V, 3) inside [0, 1]")
        d = self.downsample_matrix
        if d.shape[1] != v or d.shape[0] < 1 or d.shape[0] > v:
            raise ValueError(f"downsample_matrix must be (V_d <= V, V), got {d.shape}")
        if d.data.size and d.data.min() < -_TOL:
            raise ValueError("downsample_matrix has negative entries")
        if np.abs(np.asarray(d.sum(axis=1)).ravel() - 1.0).max() > 1e-6:
            raise ValueError("downsample_matrix rows must sum to 1")


@dataclass
class ModelParams:
    """Per-instance parameters: relative rotations, shape, camera."""

    theta: np.ndarray
    beta: np.ndarray
    camera: WeakPerspectiveCamera
    psi: Optional[np.ndarray] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.psi is not None:
            self.psi = np.asarray(self.psi, dtype=float)


@dataclass
class PosedState:
    """FK output; `vertices` is filled once the mesh has been skinned."""

    global_rotations: np.ndarray
    joint_positions: np.ndarray
    vertices: Optional[np.ndarray] = None


def shape_blend(model: ArticulatedModel, beta: np.ndarray, psi: Optional[np.ndarray] = None):
    """Template plus linear shape (and expression) offsets.

    Args:
        beta: (..., B) shape coefficients.
        psi: optional (..., E) expression coefficients.

    Returns:
        (shaped_vertices (..., V, 3), rest_joints (..., J, 3))
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] != model.n_shape:
        raise ValueError(f"beta length {beta.shape[-1]} != {model.n_shape} blendshapes")
    verts = model.template_vertices + np.einsum("...b,bvc->...vc", beta, model.shape_blendshapes)
    if psi is not None:
        psi = np.asarray(psi, dtype=float)
        if psi.shape[-1] != model.n_expression:
            raise ValueError(f"psi length {psi.shape[-1]} != {model.n_expression} blendshapes")
        verts = verts + np.einsum("...b,bvc->...vc", psi, model.expression_blendshapes)
    rest_joints = np.einsum("jv,...vc->...jc", model.joint_regressor, verts)
    return verts, rest_joints


def forward_kinematics(tree: KinematicTree, theta: np.ndarray, rest_joints: np.ndarray) -> PosedState:
    """Walk the tree accumulating global rotations and joint positions.

    Args:
        theta: (..., J, 3, 3) relative rotations, one per joint.
        rest_joints: (..., J, 3) rest joint centers.
    """
    theta = np.asarray(theta, dtype=float)
    rest_joints = np.asarray(rest_joints, dtype=float)
    j = tree.n_joints
    if theta.shape[-3:] != (j, 3, 3):
        raise ValueError(f"theta must be (..., {j}, 3, 3), got {theta.shape}")
    if rest_joints.shape[-2:] != (j, 3):
        raise ValueError(f"rest_joints must be (..., {j}, 3), got {rest_joints.shape}")
    batch = np.broadcast_shapes(theta.shape[:-3], rest_joints.shape[:-2])
    theta = np.broadcast_to(theta, batch + (j, 3, 3))
    rest_joints = np.broadcast_to(rest_joints, batch + (j, 3))

    glob = np.empty_like(theta)
    pos = np.empty_like(rest_joints)
    glob[..., 0, :, :] = theta[..., 0, :, :]
    pos[..., 0, :] = rest_joints[..., 0, :]
    for k in range(1, j):
        p = tree.parents[k]
        glob[..., k, :, :] = glob[..., p, :, :] @ theta[..., k, :, :]
        off = rest_joints[..., k, :] - rest_joints[..., p, :]
        pos[..., k, :] = pos[..., p, :] + np.einsum("...ab,...b->...a", glob[..., p, :, :], off)
    return PosedState(global_rotations=glob, joint_positions=pos)


def lbs(shaped_vertices: np.ndarray, posed: PosedState, model: ArticulatedModel,
        rest_joints: Optional[np.ndarray] = None) -> np.ndarray:
    """Linear blend skinning of the shaped template into the pose.

    Each joint contributes the rigid map taking its rest frame to its
    posed frame; per-vertex transforms are the skin-weight blend.
    """
    shaped = np.asarray(shaped_vertices, dtype=float)
    if shaped.shape[-2:] != (model.n_vertices, 3):
        raise ValueError(f"vertices must be (..., {model.n_vertices}, 3), got {shaped.shape}")
    if rest_joints is None:
        rest_joints = np.einsum("jv,...vc->...jc", model.joint_regressor, shaped)
    glob = posed.global_rotations
    pos = posed.joint_positions
    w = model.skin_weights
    blended_rot = np.einsum("vj,...jab->...vab", w, glob)
    joint_shift = pos - np.einsum("...jab,...jb->...ja", glob, rest_joints)
    blended_shift = np.einsum("vj,...ja->...va", w, joint_shift)
    return np.einsum("...vab,...vb->...va", blended_rot, shaped) + blended_shift


def downsample(vertices: np.ndarray, model: ArticulatedModel) -> np.ndarray:
    """Reduce (..., V, 3) vertices to the model's (..., V_d, 3) subset blend."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[-2:] != (model.n_vertices, 3):
        raise ValueError(f"vertices must be (..., {model.n_vertices}, 3), got {vertices.shape}")
    if vertices.ndim == 2:
        return np.asarray(model.downsample_matrix @ vertices)
    return np.matmul(model.downsample_dense(), vertices)


def regress_joints(model: ArticulatedModel, vertices: np.ndarray) -> np.ndarray:
    """3D joints regressed from (possibly posed) vertices."""
    vertices = np.asarray(vertices, dtype=float)
    return np.einsum("jv,...vc->...jc", model.joint_regressor, vertices)


def pose_mesh(model: ArticulatedModel, params: ModelParams) -> PosedState:
    """shape_blend + forward_kinematics + lbs in one call."""
    shaped, rest_joints = shape_blend(model, params.beta, params.psi)
    posed = forward_kinematics(model.tree, params.theta, rest_joints)
    posed.vertices = lbs(shaped, posed, model, rest_joints)
    return posed
