"""Tests for the text asset formats: round trips, byte stability, validation."""

import json

import numpy as np
import pytest

import meshloop.assets as assets
from meshloop.camera import WeakPerspectiveCamera
from meshloop.feedback import FeedbackConfig, FeedbackWeights
from meshloop.integration import FaceEstimate, FullBodyParams, HandEstimate, PartEstimates
from meshloop.kinematics import ModelParams
from meshloop.rotations import random_matrix
from meshloop.toybody import toy_body_model

MODEL = toy_body_model(seed=0, downsample_count=60)
SMALL_CFG = FeedbackConfig(grid_size=4, reduce_dim=3, attention_dim=4, hidden_dim=8)


def identity_theta(n):
    return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()


def test_array_codec_round_trip():
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(4, 5, 2))
    doc = json.loads(json.dumps(assets.encode_array(arr)))
    back = assets.decode_array(doc)
    assert np.array_equal(back, arr)
    with pytest.raises(ValueError):
        assets.decode_array({"shape": [3, 3], "data": [1.0] * 8})


def test_sparse_codec_round_trip():
    back = assets.decode_sparse(assets.encode_sparse(MODEL.downsample_matrix))
    assert (back != MODEL.downsample_matrix).nnz == 0
    with pytest.raises(ValueError):
        assets.decode_sparse({"shape": [2, 2], "rows": [0], "cols": [0, 1], "values": [1.0]})


def test_model_round_trip(tmp_path):
    path = tmp_path / "model.json"
    assets.save_model(MODEL, path)
    loaded = assets.load_model(path)
    assert loaded.kind == MODEL.kind
    assert loaded.tree.names == MODEL.tree.names
    assert np.array_equal(loaded.tree.parents, MODEL.tree.parents)
    for name in ("template_vertices", "faces", "joint_regressor", "skin_weights",
                 "shape_blendshapes", "part_index", "uv", "pncc"):
        assert np.array_equal(getattr(loaded, name), getattr(MODEL, name)), name
    assert (loaded.downsample_matrix != MODEL.downsample_matrix).nnz == 0
    # second save of the loaded model reproduces the file byte for byte
    again = tmp_path / "model2.json"
    assets.save_model(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_model_count_check(tmp_path):
    path = tmp_path / "model.json"
    assets.save_model(MODEL, path)
    doc = json.loads(path.read_text())
    doc["counts"]["joints"] = 9
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        assets.load_model(path)


def test_weights_round_trip(tmp_path):
    weights = FeedbackWeights(MODEL, 15, SMALL_CFG, seed=3)
    path = tmp_path / "weights.json"
    assets.save_weights(weights, path)
    loaded = assets.load_weights(path, MODEL)
    for (name, arr), (name2, arr2) in zip(weights.named_parameters(),
                                          loaded.named_parameters()):
        assert name == name2
        assert np.array_equal(arr, arr2), name
    assert loaded.config == weights.config
    again = tmp_path / "weights2.json"
    assets.save_weights(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_weights_model_mismatch(tmp_path):
    weights = FeedbackWeights(MODEL, 15, SMALL_CFG, seed=0)
    path = tmp_path / "weights.json"
    assets.save_weights(weights, path)
    other = toy_body_model(seed=0, downsample_count=80)
    with pytest.raises(ValueError):
        assets.load_weights(path, other)


def test_params_round_trip_single(tmp_path):
    rng = np.random.default_rng(1)
    params = ModelParams(theta=random_matrix(rng, size=MODEL.n_joints),
                         beta=rng.normal(size=MODEL.n_shape),
                         camera=WeakPerspectiveCamera(scale=0.8, translation=(0.1, -0.2)))
    path = tmp_path / "params.json"
    assets.save_params(params, path)
    doc = json.loads(path.read_text())
    assert doc["layout"] == "single"
    assert "psi" not in doc
    back = assets.load_params(path)
    assert isinstance(back, ModelParams)
    assert np.array_equal(back.theta, params.theta)
    assert np.array_equal(back.beta, params.beta)
    assert back.camera.scale == params.camera.scale
    assert np.array_equal(back.camera.translation, params.camera.translation)
    assert back.psi is None


def test_params_round_trip_fullbody(tmp_path):
    rng = np.random.default_rng(2)
    params = FullBodyParams(theta=random_matrix(rng, size=55),
                            beta=rng.normal(size=8),
                            psi=rng.normal(size=4),
                            camera=WeakPerspectiveCamera(scale=1.1, translation=(0.0, 0.3)))
    path = tmp_path / "fb.json"
    assets.save_params(params, path)
    back = assets.load_params(path)
    assert isinstance(back, FullBodyParams)
    assert np.array_equal(back.theta, params.theta)
    assert np.array_equal(back.psi, params.psi)


def test_estimates_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    est = PartEstimates(
        body_theta=random_matrix(rng, size=22),
        body_beta=rng.normal(size=8),
        camera=WeakPerspectiveCamera(scale=0.9, translation=(0.05, 0.0)),
        left_hand=HandEstimate(global_orient=random_matrix(rng),
                               finger_theta=random_matrix(rng, size=15),
                               confidence=0.85),
        face=FaceEstimate(jaw_theta=random_matrix(rng, size=3),
                          psi=rng.normal(size=4), confidence=0.4),
    )
    path = tmp_path / "est.json"
    assets.save_estimates(est, path)
    back = assets.load_estimates(path)
    assert np.array_equal(back.body_theta, est.body_theta)
    assert np.array_equal(back.left_hand.finger_theta, est.left_hand.finger_theta)
    assert back.left_hand.confidence == est.left_hand.confidence
    assert back.right_hand is None
    assert np.array_equal(back.face.psi, est.face.psi)
    assert back.face.confidence == est.face.confidence


def test_mesh_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    verts = rng.normal(size=(17, 3))
    path = tmp_path / "mesh.json"
    assets.save_mesh(verts, path, scenario=3, iteration=2)
    doc = json.loads(path.read_text())
    assert doc["scenario"] == 3 and doc["iteration"] == 2
    assert np.array_equal(assets.load_mesh(path), verts)


def test_format_and_version_checks(tmp_path):
    path = tmp_path / "mesh.json"
    assets.save_mesh(np.zeros((2, 3)), path)
    with pytest.raises(ValueError):
        assets.load_params(path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        assets.load_mesh(path)


def test_report_round_trip(tmp_path):
    doc = {"strategy": "adaptive", "iterations": 3, "gated": True,
           "alpha": 0.4886921905584123, "scale": float(np.pi), "empty_ok": False}
    path = tmp_path / "report.txt"
    assets.write_report(doc, path)
    text = path.read_text()
    assert "gated = true" in text
    assert "iterations = 3" in text
    back = assets.read_report(path)
    assert back == doc
    assert isinstance(back["gated"], bool) and isinstance(back["alpha"], float)
    path.write_text("no separator here\n")
    with pytest.raises(ValueError):
        assets.read_report(path)


def test_write_csv_exact_bytes(tmp_path):
    path = tmp_path / "rows.csv"
    assets.write_csv(path, ["id", "value"], [[0, 1.5], [1, "x"]])
    assert path.read_bytes() == b"id,value\n0,1.5\n1,x\n"
