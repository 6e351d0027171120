import numpy as np
from meshloop import rotations as rot
from meshloop.toybody import toy_fullbody_model
from meshloop.kinematics import forward_kinematics, shape_blend
from meshloop.camera import WeakPerspectiveCamera
from meshloop.integration import (PartEstimates, HandEstimate, FaceEstimate,
                                  adaptive_integrate, copy_paste_wrist, assemble,
                                  disassemble, visibility_gate, visibility_confidence,
                                  N_BODY_JOINTS)
from meshloop.kinematics import KinematicTree

rng = np.random.default_rng(7)
model = toy_fullbody_model(seed=0)
cam = WeakPerspectiveCamera(scale=1.0, translation=np.zeros(2))

def rand_theta(n, scale=0.15):
    aa = rng.normal(scale=scale, size=(n, 3))
    return rot.axis_angle_to_matrix(aa)

body_theta = rand_theta(N_BODY_JOINTS)
fingers = rand_theta(15, 0.2)

# target hand orientation: body wrist's global comp with known extra twist
body_tree = KinematicTree(model.tree.parents[:N_BODY_JOINTS].copy(), model.tree.names[:N_BODY_JOINTS])
from meshloop.integration import global_rotation
g_elbow = global_rotation(body_tree, body_theta, body_tree.index("left_elbow"))

# forearm axis (local) from rest joints
_, rest_joints = shape_blend(model, np.zeros(model.n_shape) if hasattr(model, 'n_shape') else np.zeros(model.shape_blendshapes.shape[0]))
e, w = model.tree.index("left_elbow"), model.tree.index("left_wrist")
axis_rest = rest_joints[w] - rest_joints[e]
axis_rest = axis_rest / np.linalg.norm(axis_rest)

alpha_true = np.deg2rad(100.0)
swing_axis = np.cross(axis_rest, [0, 0, 1.0]); swing_axis /= np.linalg.norm(swing_axis)
swing = rot.quat_to_matrix(rot.twist_quat(swing_axis, 0.4))
twist = rot.quat_to_matrix(rot.twist_quat(axis_rest, alpha_true))
wrist_target_rel = swing @ twist
hand_global = g_elbow @ wrist_target_rel

est = PartEstimates(body_theta=body_theta, body_beta=np.zeros(model.shape_blendshapes.shape[0]),
                    camera=cam,
                    left_hand=HandEstimate(global_orient=hand_global, finger_theta=fingers, confidence=0.9),
                    right_hand=HandEstimate(global_orient=np.eye(3), finger_theta=np.broadcast_to(np.eye(3),(15,3,3)).copy(), confidence=0.2),
                    face=FaceEstimate(jaw_theta=np.broadcast_to(np.eye(3),(3,3,3)).copy(), psi=np.zeros(model.n_expression), confidence=0.8))

# copy-paste
p_cp, r_cp = adaptive_integrate(est, model, strategy="copy-paste")
full_cp = forward_kinematics(model.tree, p_cp.theta, rest_joints)
print("cp: hand global orientation err", np.abs(full_cp.global_rotations[w] - hand_global).max())
print("cp report:", [(h.side, h.mode, round(h.alpha_tw,4)) for h in r_cp.hands])

# adaptive
p_ad, r_ad = adaptive_integrate(est, model, strategy="adaptive")
full_ad = forward_kinematics(model.tree, p_ad.theta, rest_joints)
print("ad: hand global orientation err", np.abs(full_ad.global_rotations[w] - hand_global).max())
print("ad: joint pos err vs cp", np.abs(full_ad.joint_positions - full_cp.joint_positions).max())
lh = [h for h in r_ad.hands if h.side == "left"][0]
print("ad left: alpha_tw deg", np.rad2deg(lh.alpha_tw), "alpha_cp deg", np.rad2deg(lh.alpha_cp),
      "residual deg", np.rad2deg(lh.residual_twist))
rh = [h for h in r_ad.hands if h.side == "right"][0]
print("ad right mode:", rh.mode, "fingers identity:", np.allclose(disassemble(p_ad)["right_fingers"], np.eye(3)))
print("ad right wrist untouched:", np.allclose(p_ad.theta[body_tree.index('right_wrist')], body_theta[body_tree.index('right_wrist')]))
print("face used:", r_ad.face_used, "jaw passthrough:", np.allclose(disassemble(p_ad)["jaw_theta"], np.eye(3)))
print("gate:", visibility_gate(est))
print("vis conf 15/21:", visibility_confidence(np.arange(21) < 15))
print("flat report keys:", sorted(r_ad.to_flat_dict())[:6], "...")

# round trip
parts = disassemble(p_ad)
re = assemble(parts["body_theta"], parts["left_fingers"], parts["right_fingers"],
              parts["jaw_theta"], parts["beta"], parts["psi"], cam)
print("assemble round trip exact:", np.array_equal(re.theta, p_ad.theta))

# expected alpha_cp = 100 - 72 = 28 deg; residual = 72 deg
assert abs(np.rad2deg(lh.alpha_cp) - 28.0) < 1e-9 + 1e-6
assert abs(np.rad2deg(lh.residual_twist) - 72.0) < 1e-6
assert np.abs(full_ad.joint_positions - full_cp.joint_positions).max() < 1e-12
assert np.abs(full_ad.global_rotations[w] - hand_global).max() < 1e-12
print("OK")
