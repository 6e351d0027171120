"""Procedural toy articulated models: body, hand, full body.

Stand-ins for scanned human models: tube-and-sphere meshes hung on small
skeletons, with smooth seeded blendshapes, a nearest-ring joint regressor
and farthest-point downsampling. Everything is deterministic given the
seed; geometry is closed form and only the blendshape fields draw random
numbers.

Joint counts: body 22, hand 16, full body 55 (22 body + 2 x 15 fingers +
3 jaw). Units are meters; the body stands roughly 1.6 m tall centered at
the origin so a unit-scale weak-perspective camera frames it.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .kinematics import ArticulatedModel, KinematicTree

BODY_DOWNSAMPLE = 431
HAND_DOWNSAMPLE = 195
FULLBODY_DOWNSAMPLE = 520

# part ids (1-based; 0 is background in rendered maps)
PART_TORSO, PART_HEAD, PART_LEFT_ARM, PART_RIGHT_ARM, PART_LEFT_LEG, PART_RIGHT_LEG = 1, 2, 3, 4, 5, 6
PART_LEFT_HAND, PART_RIGHT_HAND = 7, 8

_RING_SEGS = 10

# name, parent name, rest position (x left, y up, z forward)
_BODY_JOINTS = [
    ("pelvis", None, (0.0, 0.05, 0.0)),
    ("left_hip", "pelvis", (0.09, 0.0, 0.0)),
    ("right_hip", "pelvis", (-0.09, 0.0, 0.0)),
    ("spine1", "pelvis", (0.0, 0.17, 0.0)),
    ("left_knee", "left_hip", (0.10, -0.38, 0.0)),
    ("right_knee", "right_hip", (-0.10, -0.38, 0.0)),
    ("spine2", "spine1", (0.0, 0.29, 0.0)),
    ("left_ankle", "left_knee", (0.10, -0.74, 0.0)),
    ("right_ankle", "right_knee", (-0.10, -0.74, 0.0)),
    ("spine3", "spine2", (0.0, 0.41, 0.0)),
    ("left_foot", "left_ankle", (0.10, -0.80, 0.10)),
    ("right_foot", "right_ankle", (-0.10, -0.80, 0.10)),
    ("neck", "spine3", (0.0, 0.51, 0.0)),
    ("left_collar", "spine3", (0.07, 0.45, 0.0)),
    ("right_collar", "spine3", (-0.07, 0.45, 0.0)),
    ("head", "neck", (0.0, 0.62, 0.0)),
    ("left_shoulder", "left_collar", (0.17, 0.47, 0.0)),
    ("right_shoulder", "right_collar", (-0.17, 0.47, 0.0)),
    ("left_elbow", "left_shoulder", (0.43, 0.47, 0.0)),
    ("right_elbow", "right_shoulder", (-0.43, 0.47, 0.0)),
    ("left_wrist", "left_elbow", (0.68, 0.47, 0.0)),
    ("right_wrist", "right_elbow", (-0.68, 0.47, 0.0)),
]

# finger layout in the hand's local frame: origin at the wrist, +x distal
_FINGERS = ["thumb", "index", "middle", "ring", "pinky"]
_FINGER_Z = {"thumb": 0.055, "index": 0.028, "middle": 0.0, "ring": -0.026, "pinky": -0.050}
_FINGER_X = {"thumb": (0.045, 0.085, 0.115, 0.140), "index": (0.095, 0.132, 0.162, 0.186),
             "middle": (0.098, 0.138, 0.170, 0.196), "ring": (0.094, 0.130, 0.160, 0.183),
             "pinky": (0.088, 0.116, 0.140, 0.158)}


class _MeshBuilder:
    """Accumulates tube/sphere geometry plus per-vertex metadata."""

    def __init__(self, n_joints: int):
        self.n_joints = n_joints
        self.vertices = []
        self.faces = []
        self.parts = []
        self.uv = []
        self.weights = []

    def _frame(self, direction: np.ndarray):
        t = direction / np.linalg.norm(direction)
        ref = np.array([0.0, 0.0, 1.0]) if abs(t[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        n1 = np.cross(t, ref)
        n1 /= np.linalg.norm(n1)
        n2 = np.cross(t, n1)
        return t, n1, n2

    def _weight_row(self, parent_joint: int, child_joint: int, f: float) -> np.ndarray:
        row = np.zeros(self.n_joints)
        # proximal joint drives most of the bone; blend rises past midpoint
        wc = max(0.0, (f - 0.5) / 0.5) ** 2
        row[parent_joint] += 1.0 - wc
        row[child_joint] += wc
        return row

    def _connect_rings(self, r0: int, r1: int, segs: int):
        for k in range(segs):
            k2 = (k + 1) % segs
            self.faces.append((r0 + k, r1 + k, r0 + k2))
            self.faces.append((r0 + k2, r1 + k, r1 + k2))

    def add_tube(self, a, b, radius: float, rings: int, parent_joint: int, child_joint: int,
                 part: int, v_range=(0.0, 1.0), segs: int = _RING_SEGS):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t, n1, n2 = self._frame(b - a)
        first = None
        prev = None
        for i in range(rings):
            f = (i + 0.5) / rings
            center = a + f * (b - a)
            base = len(self.vertices)
            if first is None:
                first = base
            for k in range(segs):
                ang = 2.0 * np.pi * k / segs
                self.vertices.append(center + radius * (np.cos(ang) * n1 + np.sin(ang) * n2))
                self.parts.append(part)
                self.uv.append((k / segs, v_range[0] + f * (v_range[1] - v_range[0])))
                self.weights.append(self._weight_row(parent_joint, child_joint, f))
            if prev is not None:
                self._connect_rings(prev, base, segs)
            prev = base
        return first, prev

    def add_sphere(self, center, radius: float, joint: int, part: int,
                   n_rings: int = 5, segs: int = _RING_SEGS):
        center = np.asarray(center, dtype=float)
        prev = None
        for i in range(n_rings):
            polar = np.pi * (i + 0.5) / n_rings
            ring_r = radius * np.sin(polar)
            y = radius * np.cos(polar)
            base = len(self.vertices)
            for k in range(segs):
                ang = 2.0 * np.pi * k / segs
                self.vertices.append(center + np.array([ring_r * np.cos(ang), y, ring_r * np.sin(ang)]))
                self.parts.append(part)
                self.uv.append((k / segs, (i + 0.5) / n_rings))
                row = np.zeros(self.n_joints)
                row[joint] = 1.0
                self.weights.append(row)
            if prev is not None:
                self._connect_rings(prev, base, segs)
            prev = base

    def arrays(self):
        return (np.array(self.vertices), np.array(self.faces, dtype=int), np.array(self.parts, dtype=int),
                np.clip(np.array(self.uv, dtype=float), 0.0, 1.0), np.array(self.weights))


def _fps_downsample(vertices: np.ndarray, count: int, k_neighbors: int = 3) -> sp.csr_matrix:
    """Farthest-point selection; each row averages the pick's k nearest."""
    v = vertices.shape[0]
    count = min(count, v)
    chosen = np.empty(count, dtype=int)
    chosen[0] = 0
    dist = np.linalg.norm(vertices - vertices[0], axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        dist = np.minimum(dist, np.linalg.norm(vertices - vertices[nxt], axis=1))
    tree = cKDTree(vertices)
    _, nbrs = tree.query(vertices[chosen], k=k_neighbors)
    nbrs = np.atleast_2d(nbrs)
    rows = np.repeat(np.arange(count), k_neighbors)
    cols = nbrs.ravel()
    vals = np.full(rows.shape, 1.0 / k_neighbors)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(count, v))
    m.sum_duplicates()
    return m


def _joint_regressor(vertices: np.ndarray, joint_positions: np.ndarray, k: int = 8) -> np.ndarray:
    tree = cKDTree(vertices)
    _, nbrs = tree.query(joint_positions, k=k)
    reg = np.zeros((joint_positions.shape[0], vertices.shape[0]))
    for j, idx in enumerate(np.atleast_2d(nbrs)):
        reg[j, idx] = 1.0 / len(idx)
    return reg


def _smooth_blendshapes(rng: np.random.Generator, vertices: np.ndarray, count: int,
                        scale: float = 0.015, mask: np.ndarray | None = None) -> np.ndarray:
    """Low-frequency sinusoidal displacement fields; first mode is global size."""
    v = vertices.shape[0]
    shapes = np.zeros((count, v, 3))
    if count == 0:
        return shapes
    center = vertices.mean(axis=0)
    shapes[0] = 0.05 * (vertices - center)
    for i in range(1, count):
        amp = rng.normal(0.0, scale, size=3)
        freq = rng.normal(0.0, 2.5, size=3)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        arg = vertices @ freq
        shapes[i] = amp * np.sin(arg[:, None] + phase)
    if mask is not None:
        shapes *= mask[None, :, None]
    return shapes


def _pncc(vertices: np.ndarray) -> np.ndarray:
    lo = vertices.min(axis=0)
    span = vertices.max(axis=0) - lo
    span[span < 1e-9] = 1.0
    return (vertices - lo) / span


def _bone_part(child_name: str) -> int:
    if child_name in ("head",):
        return PART_HEAD
    for side, arm, leg in (("left_", PART_LEFT_ARM, PART_LEFT_LEG), ("right_", PART_RIGHT_ARM, PART_RIGHT_LEG)):
        if child_name.startswith(side):
            stem = child_name[len(side):]
            if stem in ("shoulder", "elbow", "wrist"):
                return arm
            if stem in ("knee", "ankle", "foot"):
                return leg
    return PART_TORSO


_BONE_RADII = {
    PART_TORSO: 0.085, PART_HEAD: 0.045,
    PART_LEFT_ARM: 0.040, PART_RIGHT_ARM: 0.040,
    PART_LEFT_LEG: 0.052, PART_RIGHT_LEG: 0.052,
}


def _build_body_mesh(joint_names, joint_pos, tree, builder: _MeshBuilder, wrist_stubs: bool = True):
    """Tubes along every bone, arranged per part for the uv v-axis."""
    bones_by_part = {}
    for j, name in enumerate(joint_names):
        p = tree.parents[j]
        if p < 0:
            continue
        part = _bone_part(name)
        bones_by_part.setdefault(part, []).append((int(p), j, name))
    for part, bones in sorted(bones_by_part.items()):
        n = len(bones)
        for order, (p, j, name) in enumerate(bones):
            a, b = joint_pos[p], joint_pos[j]
            length = np.linalg.norm(b - a)
            if length < 1e-6:
                continue
            radius = _BONE_RADII[part]
            if name.endswith(("hip", "collar")):
                radius *= 0.7
            rings = max(2, int(round(length / 0.065)))
            builder.add_tube(a, b, radius, rings, p, j, part,
                             v_range=(order / n, (order + 1) / n))
    # wrist stubs give the hand area some geometry on the plain body
    if wrist_stubs:
        for wrist, direction in (("left_wrist", 1.0), ("right_wrist", -1.0)):
            j = joint_names.index(wrist)
            part = PART_LEFT_ARM if direction > 0 else PART_RIGHT_ARM
            a = joint_pos[j]
            b = a + np.array([direction * 0.10, 0.0, 0.0])
            builder.add_tube(a, b, 0.028, 2, j, j, part, v_range=(0.97, 1.0))
    head = joint_names.index("head")
    builder.add_sphere(joint_pos[head] + np.array([0.0, 0.04, 0.0]), 0.11, head, PART_HEAD)


def _assemble(kind, joint_names, parents, joint_pos, builder, rng, n_shape, downsample_count,
              expression_mask=None, n_expression=0):
    verts, faces, parts, uv, weights = builder.arrays()
    tree = KinematicTree(np.asarray(parents), list(joint_names))
    regressor = _joint_regressor(verts, joint_pos)
    shapes = _smooth_blendshapes(rng, verts, n_shape)
    expr_mask = expression_mask(verts) if expression_mask is not None else None
    expr = _smooth_blendshapes(rng, verts, n_expression, scale=0.01, mask=expr_mask)
    return ArticulatedModel(
        template_vertices=verts,
        faces=faces,
        tree=tree,
        joint_regressor=regressor,
        skin_weights=weights,
        shape_blendshapes=shapes,
        expression_blendshapes=expr,
        part_index=parts,
        uv=uv,
        pncc=_pncc(verts),
        downsample_matrix=_fps_downsample(verts, downsample_count),
        kind=kind,
    )


def toy_body_model(seed: int = 0, downsample_count: int = BODY_DOWNSAMPLE, n_shape: int = 8) -> ArticulatedModel:
    """22-joint toy humanoid."""
    rng = np.random.default_rng(seed)
    names = [j[0] for j in _BODY_JOINTS]
    parents = [-1 if j[1] is None else names.index(j[1]) for j in _BODY_JOINTS]
    pos = np.array([j[2] for j in _BODY_JOINTS], dtype=float)
    tree = KinematicTree(np.asarray(parents), names)
    builder = _MeshBuilder(len(names))
    _build_body_mesh(names, pos, tree, builder)
    return _assemble("body", names, parents, pos, builder, rng, n_shape, downsample_count)


def _hand_joints(side: str):
    sgn = 1.0 if side == "left" else -1.0
    names = ["wrist"]
    parents = [-1]
    pos = [(0.0, 0.0, 0.0)]
    for finger in _FINGERS:
        xs = _FINGER_X[finger]
        z = _FINGER_Z[finger]
        for seg in range(3):
            names.append(f"{finger}{seg + 1}")
            parents.append(0 if seg == 0 else len(names) - 2)
            y = -0.012 if finger == "thumb" else 0.0
            pos.append((sgn * xs[seg], y, z))
    return names, parents, np.array(pos, dtype=float), sgn


def _build_hand_mesh(names, pos, parents, sgn, builder: _MeshBuilder):
    wrist = 0
    # palm: one thick tube from the wrist toward the middle mcp; parts are
    # palm = 1 and one per finger = 2..6
    palm_end = pos[names.index("middle1")] * np.array([1.0, 1.0, 0.0])
    builder.add_tube(pos[wrist], palm_end, 0.034, 4, wrist, wrist, 1, v_range=(0.0, 1.0), segs=12)
    for fi, finger in enumerate(_FINGERS):
        chain = [names.index(f"{finger}{seg + 1}") for seg in range(3)]
        xs = _FINGER_X[finger]
        tip = pos[chain[2]] + np.array([sgn * (xs[3] - xs[2]), 0.0, 0.0])
        pts = [pos[chain[0]], pos[chain[1]], pos[chain[2]], tip]
        for s in range(3):
            builder.add_tube(pts[s], pts[s + 1], 0.009, 2, chain[s], chain[min(s + 1, 2)],
                             fi + 2, v_range=(s / 3.0, (s + 1) / 3.0), segs=6)


def toy_hand_model(seed: int = 0, side: str = "left", downsample_count: int = HAND_DOWNSAMPLE,
                   n_shape: int = 6) -> ArticulatedModel:
    """16-joint toy hand (wrist root plus 3 joints per finger)."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    rng = np.random.default_rng(seed)
    names, parents, pos, sgn = _hand_joints(side)
    builder = _MeshBuilder(len(names))
    _build_hand_mesh(names, pos, parents, sgn, builder)
    return _assemble(f"hand-{side}", names, parents, pos, builder, rng, n_shape, downsample_count)


def toy_fullbody_model(seed: int = 0, downsample_count: int = FULLBODY_DOWNSAMPLE,
                       n_shape: int = 8, n_expression: int = 4) -> ArticulatedModel:
    """55-joint toy: 22 body joints, 15 fingers per hand, 3 jaw joints."""
    rng = np.random.default_rng(seed)
    names = [j[0] for j in _BODY_JOINTS]
    parents = [-1 if j[1] is None else names.index(j[1]) for j in _BODY_JOINTS]
    pos = [np.array(j[2], dtype=float) for j in _BODY_JOINTS]

    finger_specs = []
    for side, sgn in (("left", 1.0), ("right", -1.0)):
        wrist_name = f"{side}_wrist"
        wrist_idx = names.index(wrist_name)
        wrist_pos = pos[wrist_idx]
        for finger in _FINGERS:
            xs = _FINGER_X[finger]
            z = _FINGER_Z[finger]
            for seg in range(3):
                nm = f"{side}_{finger}{seg + 1}"
                parent = wrist_idx if seg == 0 else len(names) - 1
                names.append(nm)
                parents.append(parent)
                y = -0.012 if finger == "thumb" else 0.0
                pos.append(wrist_pos + np.array([sgn * xs[seg], y, z]))
                finger_specs.append((nm, side, sgn, finger, seg))
    head_idx = names.index("head")
    head_pos = pos[head_idx]
    for i, off in enumerate([(0.0, -0.045, 0.055), (0.0, -0.075, 0.085), (0.0, -0.095, 0.110)]):
        names.append(f"jaw{i + 1}")
        parents.append(head_idx if i == 0 else len(names) - 2)
        pos.append(head_pos + np.array(off))
    pos = np.array(pos)
    tree = KinematicTree(np.asarray(parents), names)

    builder = _MeshBuilder(len(names))
    _build_body_mesh(names[:22], pos[:22], KinematicTree(np.asarray(parents[:22]), names[:22]),
                     builder, wrist_stubs=False)
    # palms and fingers as thin tubes, one hand part per side
    for side, sgn, hand_part in (("left", 1.0, PART_LEFT_HAND), ("right", -1.0, PART_RIGHT_HAND)):
        wrist_idx = names.index(f"{side}_wrist")
        wrist_pos = pos[wrist_idx]
        palm_end = wrist_pos + np.array([sgn * 0.095, 0.0, 0.0])
        builder.add_tube(wrist_pos, palm_end, 0.030, 3, wrist_idx, wrist_idx, hand_part,
                         v_range=(0.0, 0.2), segs=8)
        for fi, finger in enumerate(_FINGERS):
            chain = [names.index(f"{side}_{finger}{seg + 1}") for seg in range(3)]
            xs = _FINGER_X[finger]
            tip = pos[chain[2]] + np.array([sgn * (xs[3] - xs[2]), 0.0, 0.0])
            pts = [pos[chain[0]], pos[chain[1]], pos[chain[2]], tip]
            for s in range(3):
                builder.add_tube(pts[s], pts[s + 1], 0.009, 2, chain[s], chain[min(s + 1, 2)],
                                 hand_part, v_range=(0.2 + 0.8 * (fi * 3 + s) / 15.0,
                                                     0.2 + 0.8 * (fi * 3 + s + 1) / 15.0), segs=6)
    jaw_chain = [names.index(f"jaw{i + 1}") for i in range(3)]
    jaw_pts = [pos[head_idx]] + [pos[j] for j in jaw_chain]
    jaw_parents = [head_idx] + jaw_chain
    for s in range(3):
        builder.add_tube(jaw_pts[s], jaw_pts[s + 1], 0.016, 2, jaw_parents[s], jaw_parents[s + 1],
                         PART_HEAD, v_range=(0.9, 1.0), segs=6)

    def head_mask(verts):
        return (np.linalg.norm(verts - head_pos, axis=1) < 0.22).astype(float)

    return _assemble("fullbody", names, parents, pos, builder, rng, n_shape, downsample_count,
                     expression_mask=head_mask, n_expression=n_expression)


def generate_model(kind: str, seed: int = 0, downsample_count: int | None = None) -> ArticulatedModel:
    """Dispatch on kind: 'body', 'hand' / 'hand-right', or 'fullbody'."""
    if kind == "body":
        return toy_body_model(seed, downsample_count or BODY_DOWNSAMPLE)
    if kind in ("hand", "hand-left"):
        return toy_hand_model(seed, "left", downsample_count or HAND_DOWNSAMPLE)
    if kind == "hand-right":
        return toy_hand_model(seed, "right", downsample_count or HAND_DOWNSAMPLE)
    if kind == "fullbody":
        return toy_fullbody_model(seed, downsample_count or FULLBODY_DOWNSAMPLE)
    raise ValueError(f"unknown model kind {kind!r}")
