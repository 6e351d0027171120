"""Combining body, hand and face estimates into one full-body pose.

The wrist is the seam: the hand expert reports a global hand orientation,
the body expert a full arm chain. Copy-paste solves the wrist relative
rotation so the composed chain reproduces the hand's global orientation
exactly. The adaptive variant additionally splits the solved wrist
rotation into swing and twist about the forearm axis and moves any twist
beyond the admissible range onto the elbow, which changes no joint
position and no global hand orientation.

Full-body parameter layout: joints [0:22] body, [22:37] left fingers,
[37:52] right fingers, [52:55] jaw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rotations as rot
from .camera import WeakPerspectiveCamera
from .kinematics import ArticulatedModel, KinematicTree, forward_kinematics, shape_blend

N_BODY_JOINTS = 22
N_FINGER_JOINTS = 15
N_JAW_JOINTS = 3
N_FULLBODY_JOINTS = N_BODY_JOINTS + 2 * N_FINGER_JOINTS + N_JAW_JOINTS

DEFAULT_VISIBILITY_THRESHOLD = 0.5

MODE_GATED = "body-only-gated"
MODE_COPY_PASTE = "copy-paste"
MODE_ADAPTIVE = "adaptive"

STRATEGIES = (MODE_COPY_PASTE, MODE_ADAPTIVE)


@dataclass
class HandEstimate:
    """Hand expert output: global orientation, finger pose, confidence."""

    global_orient: np.ndarray
    finger_theta: np.ndarray
    confidence: float = 1.0

    def __post_init__(self):
        self.global_orient = np.asarray(self.global_orient, dtype=float)
        self.finger_theta = np.asarray(self.finger_theta, dtype=float)
        if self.global_orient.shape != (3, 3):
            raise ValueError(f"global_orient must be (3, 3), got {self.global_orient.shape}")
        if self.finger_theta.shape != (N_FINGER_JOINTS, 3, 3):
            raise ValueError(f"finger_theta must be ({N_FINGER_JOINTS}, 3, 3), got {self.finger_theta.shape}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class FaceEstimate:
    """Face expert output: jaw chain rotations, expression, confidence."""

    jaw_theta: np.ndarray
    psi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    confidence: float = 1.0

    def __post_init__(self):
        self.jaw_theta = np.asarray(self.jaw_theta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.jaw_theta.shape != (N_JAW_JOINTS, 3, 3):
            raise ValueError(f"jaw_theta must be ({N_JAW_JOINTS}, 3, 3), got {self.jaw_theta.shape}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class PartEstimates:
    """Per-expert estimates feeding the integration step."""

    body_theta: np.ndarray
    body_beta: np.ndarray
    camera: WeakPerspectiveCamera
    left_hand: Optional[HandEstimate] = None
    right_hand: Optional[HandEstimate] = None
    face: Optional[FaceEstimate] = None

    def __post_init__(self):
        self.body_theta = np.asarray(self.body_theta, dtype=float)
        self.body_beta = np.asarray(self.body_beta, dtype=float)
        if self.body_theta.shape != (N_BODY_JOINTS, 3, 3):
            raise ValueError(f"body_theta must be ({N_BODY_JOINTS}, 3, 3), got {self.body_theta.shape}")


@dataclass
class FullBodyParams:
    """Assembled full-body parameters (55 joints)."""

    theta: np.ndarray
    beta: np.ndarray
    psi: np.ndarray
    camera: WeakPerspectiveCamera

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.theta.shape != (N_FULLBODY_JOINTS, 3, 3):
            raise ValueError(f"theta must be ({N_FULLBODY_JOINTS}, 3, 3), got {self.theta.shape}")


@dataclass
class HandIntegration:
    """What happened to one hand during integration."""

    side: str
    mode: str
    confidence: float
    alpha_tw: float = 0.0
    alpha_cp: float = 0.0
    residual_twist: float = 0.0
    singular: bool = False


@dataclass
class IntegrationReport:
    strategy: str
    visibility_threshold: float
    hands: list = field(default_factory=list)
    face_used: bool = False

    def to_flat_dict(self) -> dict:
        doc = {
            "strategy": self.strategy,
            "visibility_threshold": self.visibility_threshold,
            "face_used": self.face_used,
        }
        for h in self.hands:
            doc[f"{h.side}.mode"] = h.mode
            doc[f"{h.side}.confidence"] = h.confidence
            doc[f"{h.side}.alpha_tw"] = h.alpha_tw
            if h.mode == MODE_ADAPTIVE:
                doc[f"{h.side}.alpha_cp"] = h.alpha_cp
                doc[f"{h.side}.residual_twist"] = h.residual_twist
            doc[f"{h.side}.singular"] = h.singular
        return doc


def visibility_confidence(visible) -> float:
    """Pseudo ground-truth confidence: visible keypoints over total."""
    visible = np.asarray(visible, dtype=bool)
    if visible.ndim != 1 or visible.size == 0:
        raise ValueError("visible must be a non-empty 1-D mask")
    return float(visible.mean())


def visibility_gate(estimates: PartEstimates,
                    threshold: float = DEFAULT_VISIBILITY_THRESHOLD) -> dict:
    """Decide per hand (and face) whether the expert output is trusted."""
    out = {}
    for side, hand in (("left", estimates.left_hand), ("right", estimates.right_hand)):
        out[side] = hand is not None and hand.confidence >= threshold
    out["face"] = estimates.face is not None and estimates.face.confidence >= threshold
    return out


def global_rotation(tree: KinematicTree, theta: np.ndarray, joint: int) -> np.ndarray:
    """Product of relative rotations from the root down to `joint`."""
    theta = np.asarray(theta, dtype=float)
    g = np.eye(3)
    for j in tree.ancestors(joint):
        g = g @ theta[j]
    return g


def copy_paste_wrist(body_theta: np.ndarray, tree: KinematicTree,
                     hand_global: np.ndarray, side: str) -> np.ndarray:
    """Wrist relative rotation reproducing the hand's global orientation.

    Solves theta_wrist = global(elbow)^-1 o hand_global, so composing the
    solved wrist onto the elbow's global rotation returns hand_global.
    With identity rotations along the whole chain this degenerates to the
    hand orientation itself.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    hand_global = np.asarray(hand_global, dtype=float)
    elbow = tree.index(f"{side}_elbow")
    g_elbow = global_rotation(tree, body_theta, elbow)
    return g_elbow.T @ hand_global


def _forearm_axis_local(model: ArticulatedModel, theta_full: np.ndarray,
                        beta: np.ndarray, psi: np.ndarray, side: str) -> np.ndarray:
    """Unit forearm direction in the elbow frame, from posed joints.

    The posed elbow-to-wrist direction pulled back through the elbow's
    global rotation; identical to the normalized rest-bone offset, which
    is what makes twist about it position-preserving.
    """
    _, rest_joints = shape_blend(model, beta, psi if psi.size else None)
    posed = forward_kinematics(model.tree, theta_full, rest_joints)
    elbow = model.tree.index(f"{side}_elbow")
    wrist = model.tree.index(f"{side}_wrist")
    d_world = posed.joint_positions[wrist] - posed.joint_positions[elbow]
    n = np.linalg.norm(d_world)
    if n < 1e-9:
        raise ValueError(f"{side} forearm has zero length; twist axis undefined")
    return posed.global_rotations[elbow].T @ (d_world / n)


def assemble(body_theta: np.ndarray, left_fingers: np.ndarray, right_fingers: np.ndarray,
             jaw_theta: np.ndarray, beta: np.ndarray, psi: np.ndarray,
             camera: WeakPerspectiveCamera) -> FullBodyParams:
    """Stack per-part rotations into the 22/30/3 full-body layout."""
    body_theta = np.asarray(body_theta, dtype=float)
    left_fingers = np.asarray(left_fingers, dtype=float)
    right_fingers = np.asarray(right_fingers, dtype=float)
    jaw_theta = np.asarray(jaw_theta, dtype=float)
    if body_theta.shape != (N_BODY_JOINTS, 3, 3):
        raise ValueError(f"body_theta must be ({N_BODY_JOINTS}, 3, 3), got {body_theta.shape}")
    if left_fingers.shape != (N_FINGER_JOINTS, 3, 3) or right_fingers.shape != (N_FINGER_JOINTS, 3, 3):
        raise ValueError("finger blocks must be (15, 3, 3)")
    if jaw_theta.shape != (N_JAW_JOINTS, 3, 3):
        raise ValueError("jaw block must be (3, 3, 3)")
    theta = np.concatenate([body_theta, left_fingers, right_fingers, jaw_theta], axis=0)
    return FullBodyParams(theta=theta, beta=np.asarray(beta, dtype=float),
                          psi=np.asarray(psi, dtype=float), camera=camera)


def disassemble(params: FullBodyParams) -> dict:
    """Split full-body rotations back into the per-part blocks."""
    t = params.theta
    return {
        "body_theta": t[:N_BODY_JOINTS],
        "left_fingers": t[N_BODY_JOINTS:N_BODY_JOINTS + N_FINGER_JOINTS],
        "right_fingers": t[N_BODY_JOINTS + N_FINGER_JOINTS:N_BODY_JOINTS + 2 * N_FINGER_JOINTS],
        "jaw_theta": t[N_BODY_JOINTS + 2 * N_FINGER_JOINTS:],
        "beta": params.beta,
        "psi": params.psi,
    }


def _identity_block(n: int) -> np.ndarray:
    return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()


def adaptive_integrate(estimates: PartEstimates, model: ArticulatedModel,
                       twist_range: rot.TwistRange = rot.DEFAULT_TWIST_RANGE,
                       visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD,
                       strategy: str = MODE_ADAPTIVE):
    """Merge expert estimates into full-body parameters.

    strategy 'copy-paste' stops after solving the wrists; 'adaptive'
    additionally relocates out-of-range wrist twist onto the elbows.
    Returns (FullBodyParams, IntegrationReport).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if model.n_joints != N_FULLBODY_JOINTS:
        raise ValueError(f"integration needs the {N_FULLBODY_JOINTS}-joint full-body model, "
                         f"got {model.n_joints} joints")
    gate = visibility_gate(estimates, visibility_threshold)
    body_theta = estimates.body_theta.copy()
    beta = estimates.body_beta
    psi = np.zeros(model.n_expression)
    body_tree = KinematicTree(model.tree.parents[:N_BODY_JOINTS].copy(),
                              model.tree.names[:N_BODY_JOINTS])

    report = IntegrationReport(strategy=strategy, visibility_threshold=visibility_threshold)
    fingers = {"left": _identity_block(N_FINGER_JOINTS), "right": _identity_block(N_FINGER_JOINTS)}

    for side in ("left", "right"):
        hand = estimates.left_hand if side == "left" else estimates.right_hand
        if not gate[side]:
            conf = 0.0 if hand is None else hand.confidence
            report.hands.append(HandIntegration(side=side, mode=MODE_GATED, confidence=conf))
            continue
        wrist_idx = body_tree.index(f"{side}_wrist")
        elbow_idx = body_tree.index(f"{side}_elbow")
        wrist_rel = copy_paste_wrist(body_theta, body_tree, hand.global_orient, side)
        body_theta[wrist_idx] = wrist_rel
        fingers[side] = hand.finger_theta.copy()

        if strategy == MODE_COPY_PASTE:
            d = rot.swing_twist(rot.matrix_to_quat(wrist_rel),
                                _forearm_axis_local_from_body(model, body_theta, beta, psi, side))
            report.hands.append(HandIntegration(side=side, mode=MODE_COPY_PASTE,
                                                confidence=hand.confidence,
                                                alpha_tw=float(d.twist_angle),
                                                residual_twist=float(d.twist_angle),
                                                singular=bool(d.singular)))
            continue

        axis = _forearm_axis_local_from_body(model, body_theta, beta, psi, side)
        d = rot.swing_twist(rot.matrix_to_quat(wrist_rel), axis)
        if d.singular:
            report.hands.append(HandIntegration(side=side, mode=MODE_ADAPTIVE,
                                                confidence=hand.confidence, singular=True))
            continue
        alpha_tw = float(d.twist_angle)
        alpha_cp = rot.compensation_angle(alpha_tw, twist_range)
        if alpha_cp != 0.0:
            comp = rot.quat_to_matrix(rot.twist_quat(axis, np.asarray(alpha_cp)))
            body_theta[elbow_idx] = body_theta[elbow_idx] @ comp
            body_theta[wrist_idx] = comp.T @ body_theta[wrist_idx]
        residual = rot.swing_twist(rot.matrix_to_quat(body_theta[wrist_idx]), axis)
        report.hands.append(HandIntegration(side=side, mode=MODE_ADAPTIVE,
                                            confidence=hand.confidence,
                                            alpha_tw=alpha_tw, alpha_cp=float(alpha_cp),
                                            residual_twist=float(residual.twist_angle),
                                            singular=False))

    jaw = _identity_block(N_JAW_JOINTS)
    if gate["face"]:
        jaw = estimates.face.jaw_theta.copy()
        if estimates.face.psi.size:
            if estimates.face.psi.size != model.n_expression:
                raise ValueError(f"expression length {estimates.face.psi.size} != model's {model.n_expression}")
            psi = estimates.face.psi.copy()
        report.face_used = True

    params = assemble(body_theta, fingers["left"], fingers["right"], jaw, beta, psi, estimates.camera)
    return params, report


def _forearm_axis_local_from_body(model: ArticulatedModel, body_theta: np.ndarray,
                                  beta: np.ndarray, psi: np.ndarray, side: str) -> np.ndarray:
    full = np.concatenate([body_theta, _identity_block(N_FULLBODY_JOINTS - N_BODY_JOINTS)], axis=0)
    return _forearm_axis_local(model, full, beta, psi, side)
