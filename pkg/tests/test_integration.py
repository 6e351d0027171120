import numpy as np
import pytest

from meshloop import integration as intg
from meshloop import rotations as rot
from meshloop.camera import WeakPerspectiveCamera
from meshloop.kinematics import forward_kinematics, shape_blend
from meshloop.toybody import toy_fullbody_model

MODEL = toy_fullbody_model(seed=0)


def identity_block(n):
    return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()


def make_estimates(body_theta=None, left=None, right=None, face=None):
    return intg.PartEstimates(
        body_theta=identity_block(intg.N_BODY_JOINTS) if body_theta is None else body_theta,
        body_beta=np.zeros(MODEL.n_shape),
        camera=WeakPerspectiveCamera(),
        left_hand=left, right_hand=right, face=face)


def forearm_axis_rest(side):
    _, rest = shape_blend(MODEL, np.zeros(MODEL.n_shape))
    e = MODEL.tree.index(f"{side}_elbow")
    w = MODEL.tree.index(f"{side}_wrist")
    d = rest[w] - rest[e]
    return d / np.linalg.norm(d)


def hand_with_twist(side, deg, swing=None):
    axis = forearm_axis_rest(side)
    q = rot.twist_quat(axis, np.deg2rad(deg))
    g = rot.quat_to_matrix(q)
    if swing is not None:
        g = swing @ g
    return intg.HandEstimate(global_orient=g, finger_theta=identity_block(intg.N_FINGER_JOINTS),
                             confidence=1.0)


def test_visibility_confidence_is_visible_fraction():
    assert intg.visibility_confidence([True, True, False, False]) == 0.5
    with pytest.raises(ValueError):
        intg.visibility_confidence([])


def test_visibility_gate_thresholds_each_part():
    left = hand_with_twist("left", 10.0)
    left.confidence = 0.4
    est = make_estimates(left=left)
    gate = intg.visibility_gate(est, threshold=0.5)
    assert gate == {"left": False, "right": False, "face": False}
    gate = intg.visibility_gate(est, threshold=0.3)
    assert gate["left"] is True


def test_global_rotation_multiplies_down_the_chain():
    rng = np.random.default_rng(0)
    theta = rot.random_matrix(rng, size=MODEL.n_joints)
    wrist = MODEL.tree.index("left_wrist")
    g = intg.global_rotation(MODEL.tree, theta, wrist)
    expect = np.eye(3)
    for j in MODEL.tree.ancestors(wrist):
        expect = expect @ theta[j]
    assert np.abs(g - expect).max() < 1e-12


def test_copy_paste_wrist_reproduces_hand_orientation():
    rng = np.random.default_rng(1)
    body = np.stack([rot.quat_to_matrix(rot.axis_angle_to_quat(0.2 * rng.standard_normal(3)))
                     for _ in range(intg.N_BODY_JOINTS)])
    hand_global = rot.random_matrix(rng)
    body_tree = intg.KinematicTree(MODEL.tree.parents[:intg.N_BODY_JOINTS].copy(),
                                   MODEL.tree.names[:intg.N_BODY_JOINTS])
    wrist_rel = intg.copy_paste_wrist(body, body_tree, hand_global, "right")
    elbow = body_tree.index("right_elbow")
    g_elbow = intg.global_rotation(body_tree, body, elbow)
    assert rot.geodesic_distance(g_elbow @ wrist_rel, hand_global) < 1e-9


def test_identity_chain_copy_paste_degenerates_to_hand_orientation():
    body_tree = intg.KinematicTree(MODEL.tree.parents[:intg.N_BODY_JOINTS].copy(),
                                   MODEL.tree.names[:intg.N_BODY_JOINTS])
    hand_global = rot.random_matrix(np.random.default_rng(2))
    wrist_rel = intg.copy_paste_wrist(identity_block(intg.N_BODY_JOINTS), body_tree,
                                      hand_global, "left")
    assert np.abs(wrist_rel - hand_global).max() < 1e-12


def test_gated_hand_keeps_identity_fingers():
    left = hand_with_twist("left", 30.0)
    left.confidence = 0.1
    params, report = intg.adaptive_integrate(make_estimates(left=left), MODEL)
    blocks = intg.disassemble(params)
    assert np.array_equal(blocks["left_fingers"], identity_block(intg.N_FINGER_JOINTS))
    assert report.hands[0].mode == intg.MODE_GATED
    assert report.hands[1].mode == intg.MODE_GATED


def test_copy_paste_reports_twist_without_compensating():
    est = make_estimates(left=hand_with_twist("left", 100.0))
    params, report = intg.adaptive_integrate(est, MODEL, strategy=intg.MODE_COPY_PASTE)
    h = report.hands[0]
    assert h.mode == intg.MODE_COPY_PASTE
    assert abs(np.rad2deg(h.alpha_tw) - 100.0) < 1e-9
    assert h.residual_twist == h.alpha_tw
    # elbow untouched by copy-paste
    elbow = MODEL.tree.index("left_elbow")
    assert np.array_equal(params.theta[elbow], np.eye(3))
    doc = report.to_flat_dict()
    assert "left.alpha_cp" not in doc
    assert "left.alpha_tw" in doc


def test_adaptive_compensates_out_of_range_twist():
    est = make_estimates(left=hand_with_twist("left", 100.0))
    params, report = intg.adaptive_integrate(est, MODEL, strategy=intg.MODE_ADAPTIVE)
    h = report.hands[0]
    assert h.mode == intg.MODE_ADAPTIVE
    assert abs(np.rad2deg(h.alpha_cp) - 28.0) < 1e-9
    assert abs(np.rad2deg(h.residual_twist) - 72.0) < 1e-9
    doc = report.to_flat_dict()
    assert abs(np.rad2deg(doc["left.alpha_cp"]) - 28.0) < 1e-9


def test_adaptive_in_range_twist_is_copy_paste():
    est = make_estimates(left=hand_with_twist("left", 40.0))
    pa, ra = intg.adaptive_integrate(est, MODEL, strategy=intg.MODE_ADAPTIVE)
    pc, rc = intg.adaptive_integrate(est, MODEL, strategy=intg.MODE_COPY_PASTE)
    assert ra.hands[0].alpha_cp == 0.0
    assert np.abs(pa.theta - pc.theta).max() < 1e-12


def test_adaptive_preserves_joint_positions_and_hand_orientation():
    rng = np.random.default_rng(3)
    swing = rot.quat_to_matrix(rot.axis_angle_to_quat(0.3 * rng.standard_normal(3)))
    body = np.stack([rot.quat_to_matrix(rot.axis_angle_to_quat(0.1 * rng.standard_normal(3)))
                     for _ in range(intg.N_BODY_JOINTS)])
    est_kw = dict(body_theta=body,
                  left=hand_with_twist("left", -110.0, swing),
                  right=hand_with_twist("right", 95.0, swing.T))
    pa, ra = intg.adaptive_integrate(make_estimates(**est_kw), MODEL, strategy=intg.MODE_ADAPTIVE)
    pc, rc = intg.adaptive_integrate(make_estimates(**est_kw), MODEL, strategy=intg.MODE_COPY_PASTE)
    _, rest = shape_blend(MODEL, pa.beta, pa.psi)
    fa = forward_kinematics(MODEL.tree, pa.theta, rest)
    fc = forward_kinematics(MODEL.tree, pc.theta, rest)
    assert np.abs(fa.joint_positions - fc.joint_positions).max() < 1e-9
    for side in ("left", "right"):
        w = MODEL.tree.index(f"{side}_wrist")
        assert rot.geodesic_distance(fa.global_rotations[w], fc.global_rotations[w]) < 1e-9


def test_singular_twist_is_flagged_and_left_alone():
    # a 180 degree flip orthogonal to the forearm has no defined twist
    axis = forearm_axis_rest("left")
    ortho = np.cross(axis, [0.0, 0.0, 1.0])
    ortho /= np.linalg.norm(ortho)
    g = rot.quat_to_matrix(rot.axis_angle_to_quat(np.pi * ortho))
    left = intg.HandEstimate(global_orient=g, finger_theta=identity_block(intg.N_FINGER_JOINTS),
                             confidence=1.0)
    params, report = intg.adaptive_integrate(make_estimates(left=left), MODEL)
    h = report.hands[0]
    assert h.singular is True
    assert h.alpha_cp == 0.0
    elbow = MODEL.tree.index("left_elbow")
    assert np.array_equal(params.theta[elbow], np.eye(3))


def test_face_gate_copies_jaw_and_expression():
    face = intg.FaceEstimate(jaw_theta=identity_block(intg.N_JAW_JOINTS),
                             psi=np.array([0.1, -0.2, 0.3, 0.0]), confidence=0.9)
    params, report = intg.adaptive_integrate(make_estimates(face=face), MODEL)
    assert report.face_used is True
    assert np.array_equal(params.psi, face.psi)
    face_low = intg.FaceEstimate(jaw_theta=identity_block(intg.N_JAW_JOINTS),
                                 psi=np.array([0.1, -0.2, 0.3, 0.0]), confidence=0.2)
    params2, report2 = intg.adaptive_integrate(make_estimates(face=face_low), MODEL)
    assert report2.face_used is False
    assert np.all(params2.psi == 0.0)


def test_wrong_expression_length_raises():
    face = intg.FaceEstimate(jaw_theta=identity_block(intg.N_JAW_JOINTS),
                             psi=np.array([0.1]), confidence=0.9)
    with pytest.raises(ValueError):
        intg.adaptive_integrate(make_estimates(face=face), MODEL)


def test_assemble_disassemble_round_trip():
    rng = np.random.default_rng(4)
    body = rot.random_matrix(rng, size=intg.N_BODY_JOINTS)
    lf = rot.random_matrix(rng, size=intg.N_FINGER_JOINTS)
    rf = rot.random_matrix(rng, size=intg.N_FINGER_JOINTS)
    jaw = rot.random_matrix(rng, size=intg.N_JAW_JOINTS)
    params = intg.assemble(body, lf, rf, jaw, np.zeros(8), np.zeros(4), WeakPerspectiveCamera())
    assert params.theta.shape == (intg.N_FULLBODY_JOINTS, 3, 3)
    blocks = intg.disassemble(params)
    assert np.array_equal(blocks["body_theta"], body)
    assert np.array_equal(blocks["left_fingers"], lf)
    assert np.array_equal(blocks["right_fingers"], rf)
    assert np.array_equal(blocks["jaw_theta"], jaw)


def test_assemble_rejects_wrong_blocks():
    with pytest.raises(ValueError):
        intg.assemble(identity_block(10), identity_block(15), identity_block(15),
                      identity_block(3), np.zeros(8), np.zeros(4), WeakPerspectiveCamera())
    with pytest.raises(ValueError):
        intg.assemble(identity_block(22), identity_block(14), identity_block(15),
                      identity_block(3), np.zeros(8), np.zeros(4), WeakPerspectiveCamera())


def test_integrate_requires_fullbody_model():
    from meshloop.toybody import toy_body_model
    with pytest.raises(ValueError):
        intg.adaptive_integrate(make_estimates(), toy_body_model(seed=0))


def test_unknown_strategy_raises():
    with pytest.raises(ValueError):
        intg.adaptive_integrate(make_estimates(), MODEL, strategy="learned")


def test_estimate_validation():
    with pytest.raises(ValueError):
        intg.HandEstimate(global_orient=np.eye(3), finger_theta=identity_block(10))
    with pytest.raises(ValueError):
        intg.HandEstimate(global_orient=np.eye(3), finger_theta=identity_block(15),
                          confidence=1.5)
    with pytest.raises(ValueError):
        intg.PartEstimates(body_theta=identity_block(5), body_beta=np.zeros(8),
                           camera=WeakPerspectiveCamera())
