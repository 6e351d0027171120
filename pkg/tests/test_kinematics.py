import numpy as np
import pytest

from meshloop import kinematics as kin
from meshloop import rotations as rot
from meshloop.camera import WeakPerspectiveCamera
from meshloop.toybody import toy_body_model


def chain_tree(n):
    return kin.KinematicTree(parents=[-1] + list(range(n - 1)),
                             names=[f"j{i}" for i in range(n)])


def test_tree_rejects_bad_root_and_order():
    with pytest.raises(ValueError):
        kin.KinematicTree(parents=[0, 0], names=["a", "b"])
    with pytest.raises(ValueError):
        kin.KinematicTree(parents=[-1, 2, 1], names=["a", "b", "c"])
    with pytest.raises(ValueError):
        kin.KinematicTree(parents=[-1, 0], names=["a", "a"])


def test_tree_lookup_and_topology():
    t = kin.KinematicTree(parents=[-1, 0, 0, 1], names=["root", "l", "r", "l_end"])
    assert t.n_joints == 4
    assert t.index("r") == 2
    with pytest.raises(KeyError):
        t.index("missing")
    assert list(t.children(0)) == [1, 2]
    assert t.ancestors(3) == [0, 1, 3]


def test_shape_blend_is_linear_in_beta():
    m = toy_body_model(seed=0)
    rng = np.random.default_rng(3)
    b1 = rng.standard_normal(m.n_shape)
    b2 = rng.standard_normal(m.n_shape)
    v1, _ = kin.shape_blend(m, b1)
    v2, _ = kin.shape_blend(m, b2)
    v12, j12 = kin.shape_blend(m, b1 + b2)
    assert np.abs((v1 - m.template_vertices) + (v2 - m.template_vertices)
                  - (v12 - m.template_vertices)).max() < 1e-12
    assert np.abs(m.joint_regressor @ v12 - j12).max() < 1e-12


def test_shape_blend_rejects_wrong_lengths():
    m = toy_body_model(seed=0)
    with pytest.raises(ValueError):
        kin.shape_blend(m, np.zeros(m.n_shape + 1))
    with pytest.raises(ValueError):
        kin.shape_blend(m, np.zeros(m.n_shape), psi=np.zeros(3))


def test_fk_identity_keeps_rest_joints():
    t = chain_tree(5)
    rng = np.random.default_rng(4)
    rest = rng.standard_normal((5, 3))
    posed = kin.forward_kinematics(t, np.broadcast_to(np.eye(3), (5, 3, 3)), rest)
    assert np.abs(posed.joint_positions - rest).max() < 1e-12
    assert np.abs(posed.global_rotations - np.eye(3)).max() < 1e-12


def test_fk_single_rotation_moves_descendants_rigidly():
    # rotating joint 1 by 90 degrees about z pivots joint 2 around joint 1
    t = chain_tree(3)
    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    theta = np.broadcast_to(np.eye(3), (3, 3, 3)).copy()
    theta[1] = rot.axis_angle_to_matrix(np.array([0.0, 0.0, np.pi / 2]))
    posed = kin.forward_kinematics(t, theta, rest)
    assert np.allclose(posed.joint_positions[1], [1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(posed.joint_positions[2], [1.0, 1.0, 0.0], atol=1e-12)
    assert np.allclose(posed.global_rotations[2], theta[1], atol=1e-12)


def test_fk_global_rotation_is_ancestor_product():
    t = chain_tree(4)
    rng = np.random.default_rng(5)
    theta = rot.random_matrix(rng, size=4)
    rest = rng.standard_normal((4, 3))
    posed = kin.forward_kinematics(t, theta, rest)
    expect = theta[0] @ theta[1] @ theta[2] @ theta[3]
    assert np.abs(posed.global_rotations[3] - expect).max() < 1e-12


def test_fk_batch_matches_loop():
    t = chain_tree(6)
    rng = np.random.default_rng(6)
    theta = rot.random_matrix(rng, size=(7, 6))
    rest = rng.standard_normal((7, 6, 3))
    batched = kin.forward_kinematics(t, theta, rest)
    for i in range(7):
        single = kin.forward_kinematics(t, theta[i], rest[i])
        assert np.abs(batched.joint_positions[i] - single.joint_positions).max() < 1e-12
        assert np.abs(batched.global_rotations[i] - single.global_rotations).max() < 1e-12


def test_fk_shape_validation():
    t = chain_tree(3)
    with pytest.raises(ValueError):
        kin.forward_kinematics(t, np.zeros((2, 3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        kin.forward_kinematics(t, np.broadcast_to(np.eye(3), (3, 3, 3)), np.zeros((2, 3)))


def test_lbs_identity_pose_returns_shaped_vertices():
    m = toy_body_model(seed=0)
    rng = np.random.default_rng(7)
    shaped, rest = kin.shape_blend(m, 0.5 * rng.standard_normal(m.n_shape))
    posed = kin.forward_kinematics(m.tree, np.broadcast_to(np.eye(3), (m.n_joints, 3, 3)), rest)
    out = kin.lbs(shaped, posed, m, rest)
    assert np.abs(out - shaped).max() < 1e-12


def test_lbs_root_rotation_is_rigid():
    # rotating only the root applies one rigid map to every vertex
    m = toy_body_model(seed=0)
    shaped, rest = kin.shape_blend(m, np.zeros(m.n_shape))
    r = rot.axis_angle_to_matrix(np.array([0.3, -0.2, 0.9]))
    theta = np.broadcast_to(np.eye(3), (m.n_joints, 3, 3)).copy()
    theta[0] = r
    posed = kin.forward_kinematics(m.tree, theta, rest)
    out = kin.lbs(shaped, posed, m, rest)
    expect = (shaped - rest[0]) @ r.T + rest[0]
    assert np.abs(out - expect).max() < 1e-9


def test_downsample_matches_dense_product():
    m = toy_body_model(seed=0)
    rng = np.random.default_rng(8)
    v = rng.standard_normal((m.n_vertices, 3))
    out = kin.downsample(v, m)
    assert out.shape == (m.n_reduced, 3)
    assert np.abs(out - m.downsample_dense() @ v).max() < 1e-12
    batched = kin.downsample(np.stack([v, 2.0 * v]), m)
    assert np.abs(batched[1] - 2.0 * out).max() < 1e-12


def test_downsample_preserves_rigid_motion():
    # row-stochastic blend commutes with any affine map
    m = toy_body_model(seed=0)
    rng = np.random.default_rng(9)
    v = rng.standard_normal((m.n_vertices, 3))
    r = rot.random_matrix(rng)
    t = rng.standard_normal(3)
    lhs = kin.downsample(v @ r.T + t, m)
    rhs = kin.downsample(v, m) @ r.T + t
    assert np.abs(lhs - rhs).max() < 1e-9


def test_pose_mesh_composes_the_pipeline():
    m = toy_body_model(seed=0)
    rng = np.random.default_rng(10)
    params = kin.ModelParams(theta=rot.random_matrix(rng, size=m.n_joints),
                             beta=0.3 * rng.standard_normal(m.n_shape),
                             camera=WeakPerspectiveCamera())
    posed = kin.pose_mesh(m, params)
    shaped, rest = kin.shape_blend(m, params.beta)
    manual = kin.lbs(shaped, kin.forward_kinematics(m.tree, params.theta, rest), m, rest)
    assert np.abs(posed.vertices - manual).max() < 1e-12


def test_model_validation_catches_bad_rows():
    m = toy_body_model(seed=0)
    bad = m.joint_regressor.copy()
    bad[0] *= 2.0
    with pytest.raises(ValueError):
        kin.ArticulatedModel(
            template_vertices=m.template_vertices, faces=m.faces, tree=m.tree,
            joint_regressor=bad, skin_weights=m.skin_weights,
            shape_blendshapes=m.shape_blendshapes,
            expression_blendshapes=m.expression_blendshapes,
            part_index=m.part_index, uv=m.uv, pncc=m.pncc,
            downsample_matrix=m.downsample_matrix, kind=m.kind)
