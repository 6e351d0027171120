"""End-to-end tests driving the command line through main() in process."""

import csv
import json

import numpy as np
import pytest
from PIL import Image

import meshloop.assets as assets
import meshloop.integration as intg
import meshloop.rotations as rot
from meshloop.camera import WeakPerspectiveCamera
from meshloop.cli import main
from meshloop.kinematics import ModelParams, pose_mesh, shape_blend


def run_ok(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 0, captured.err
    assert captured.err == ""
    return captured.out


def run_err(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 2
    lines = captured.err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error: ")
    return lines[0]


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def gen_body(tmp_path, capsys):
    path = tmp_path / "model.json"
    run_ok(["genmodel", "--kind", "body", "--seed", "0", "--out", str(path)], capsys)
    return path


def gen_fullbody(tmp_path, capsys):
    path = tmp_path / "fullbody.json"
    run_ok(["genmodel", "--kind", "fullbody", "--seed", "0", "--out", str(path)], capsys)
    return path


def write_twisted_estimates(model_path, deg, path):
    """Identity body, left hand rotated deg degrees about its rest forearm axis."""
    model = assets.load_model(model_path)
    _, rest = shape_blend(model, np.zeros(model.n_shape))
    e, w = model.tree.index("left_elbow"), model.tree.index("left_wrist")
    axis = rest[w] - rest[e]
    axis = axis / np.linalg.norm(axis)
    hand = intg.HandEstimate(
        global_orient=rot.quat_to_matrix(rot.twist_quat(axis, np.deg2rad(deg))),
        finger_theta=np.broadcast_to(np.eye(3), (intg.N_FINGER_JOINTS, 3, 3)).copy(),
        confidence=1.0)
    est = intg.PartEstimates(
        body_theta=np.broadcast_to(np.eye(3), (intg.N_BODY_JOINTS, 3, 3)).copy(),
        body_beta=np.zeros(model.n_shape),
        camera=WeakPerspectiveCamera(),
        left_hand=hand)
    assets.save_estimates(est, path)


def test_no_subcommand_is_an_error(capsys):
    msg = run_err([], capsys)
    assert "subcommand" in msg


def test_unknown_subcommand_is_an_error(capsys):
    run_err(["transmogrify"], capsys)


def test_missing_model_file(tmp_path, capsys):
    run_err(["refine", "--model", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")],
            capsys)


def test_genmodel_kinds_and_determinism(tmp_path, capsys):
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    out = run_ok(["genmodel", "--kind", "body", "--seed", "0", "--out", str(first)], capsys)
    assert "joints=22" in out
    run_ok(["genmodel", "--kind", "body", "--seed", "0", "--out", str(second)], capsys)
    assert first.read_bytes() == second.read_bytes()
    hand = tmp_path / "hand.json"
    out = run_ok(["genmodel", "--kind", "hand", "--seed", "1", "--out", str(hand)], capsys)
    assert "joints=16" in out
    assert assets.load_model(hand).kind == "hand-left"


def test_refine_untrained_loop_is_identity(tmp_path, capsys):
    model = gen_body(tmp_path, capsys)
    out_dir = tmp_path / "out"
    run_ok(["refine", "--model", str(model), "--scenarios", "3", "--seed", "0",
            "--hidden-dim", "8", "--grid", "5", "--no-attention", "--out", str(out_dir)],
           capsys)
    header, rows = read_csv(out_dir / "metrics.csv")
    assert header == ["id", "M_0", "M_1", "M_2", "M_3"]
    assert len(rows) == 3
    for row in rows:
        # untrained corrections are exactly zero, so every pass repeats M_0
        assert row[1] == row[2] == row[3] == row[4]
    mesh0 = assets.load_mesh(out_dir / "meshes" / "scenario_0000_iter0.json")
    mesh3 = assets.load_mesh(out_dir / "meshes" / "scenario_0000_iter3.json")
    assert np.array_equal(mesh0, mesh3)


def test_refine_trained_errors_decrease(tmp_path, capsys):
    model = gen_body(tmp_path, capsys)
    argv = ["refine", "--model", str(model), "--scenarios", "4", "--seed", "0",
            "--train", "--epochs", "12", "--learning-rate", "0.002", "--batch-size", "4",
            "--optimizer", "adam", "--hidden-dim", "32", "--grid", "9"]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run_ok(argv + ["--out", str(out_a)], capsys)
    _, rows = read_csv(out_a / "metrics.csv")
    means = np.array([[float(v) for v in row[1:]] for row in rows]).mean(axis=0)
    assert means[0] > means[1] > means[2] > means[3]
    # the whole pipeline is deterministic: re-running writes identical bytes
    run_ok(argv + ["--out", str(out_b)], capsys)
    assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()
    name = "meshes/scenario_0002_iter3.json"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_refine_checkpoint_reuse_and_conflicts(tmp_path, capsys):
    model = gen_body(tmp_path, capsys)
    ckpt = tmp_path / "weights.json"
    base = ["refine", "--model", str(model), "--scenarios", "2", "--seed", "0"]
    run_ok(base + ["--hidden-dim", "8", "--grid", "5", "--no-attention",
                   "--save-weights", str(ckpt), "--out", str(tmp_path / "o1")], capsys)
    run_ok(base + ["--weights", str(ckpt), "--out", str(tmp_path / "o2")], capsys)
    assert (tmp_path / "o1" / "metrics.csv").read_bytes() == \
        (tmp_path / "o2" / "metrics.csv").read_bytes()
    msg = run_err(base + ["--weights", str(ckpt), "--hidden-dim", "16",
                          "--out", str(tmp_path / "o3")], capsys)
    assert "conflicts" in msg


def test_integrate_strategies_and_reports(tmp_path, capsys):
    model = gen_fullbody(tmp_path, capsys)
    est = tmp_path / "est.json"
    write_twisted_estimates(model, 100.0, est)
    cp_dir = tmp_path / "cp"
    ad_dir = tmp_path / "ad"
    out = run_ok(["integrate", "--model", str(model), "--estimates", str(est),
                  "--strategy", "copy-paste", "--out", str(cp_dir)], capsys)
    assert "strategy=copy-paste" in out
    out = run_ok(["integrate", "--model", str(model), "--estimates", str(est),
                  "--strategy", "adaptive", "--out", str(ad_dir)], capsys)
    assert "strategy=adaptive" in out

    cp_report = assets.read_report(cp_dir / "report.txt")
    ad_report = assets.read_report(ad_dir / "report.txt")
    # copy-paste leaves the elbow alone so no compensation angle is reported
    assert "left.alpha_cp" not in cp_report
    assert cp_report["left.alpha_tw"] == pytest.approx(np.deg2rad(100.0), abs=1e-9)
    # adaptive folds the out-of-range twist into the elbow: 100 - 72 = 28
    assert ad_report["left.alpha_tw"] == pytest.approx(np.deg2rad(100.0), abs=1e-9)
    assert ad_report["left.alpha_cp"] == pytest.approx(np.deg2rad(28.0), abs=1e-9)
    assert ad_report["left.residual_twist"] == pytest.approx(np.deg2rad(72.0), abs=1e-9)

    # compensation twists about the bone axis, so joint positions agree
    assert (cp_dir / "joints.csv").read_bytes() == (ad_dir / "joints.csv").read_bytes()
    cp_params = assets.load_params(cp_dir / "params.json")
    ad_params = assets.load_params(ad_dir / "params.json")
    assert not np.array_equal(cp_params.theta, ad_params.theta)

    again = tmp_path / "ad2"
    run_ok(["integrate", "--model", str(model), "--estimates", str(est),
            "--strategy", "adaptive", "--out", str(again)], capsys)
    for name in ("params.json", "report.txt", "joints.csv"):
        assert (ad_dir / name).read_bytes() == (again / name).read_bytes()


def test_integrate_in_range_strategies_agree(tmp_path, capsys):
    model = gen_fullbody(tmp_path, capsys)
    est = tmp_path / "est.json"
    write_twisted_estimates(model, 30.0, est)
    cp_dir = tmp_path / "cp"
    ad_dir = tmp_path / "ad"
    run_ok(["integrate", "--model", str(model), "--estimates", str(est),
            "--strategy", "copy-paste", "--out", str(cp_dir)], capsys)
    run_ok(["integrate", "--model", str(model), "--estimates", str(est),
            "--strategy", "adaptive", "--out", str(ad_dir)], capsys)
    ad_report = assets.read_report(ad_dir / "report.txt")
    assert ad_report["left.alpha_cp"] == pytest.approx(0.0, abs=1e-12)
    cp = assets.load_params(cp_dir / "params.json")
    ad = assets.load_params(ad_dir / "params.json")
    assert np.allclose(cp.theta, ad.theta, atol=1e-12)


def test_render_and_offscreen(tmp_path, capsys):
    model_path = gen_body(tmp_path, capsys)
    model = assets.load_model(model_path)
    params = ModelParams(theta=np.broadcast_to(np.eye(3), (22, 3, 3)).copy(),
                         beta=np.zeros(model.n_shape),
                         camera=WeakPerspectiveCamera(scale=0.9))
    params_path = tmp_path / "params.json"
    assets.save_params(params, params_path)
    out = run_ok(["render", "--model", str(model_path), "--params", str(params_path),
                  "--out", str(tmp_path / "fg")], capsys)
    assert "56x56" in out
    parts = np.asarray(Image.open(tmp_path / "fg_parts.png"))
    assert parts.shape == (56, 56)
    assert parts.max() > 0
    for suffix in ("_parts.png", "_u.png", "_v.png", "_pncc.png"):
        assert (tmp_path / ("fg" + suffix)).exists()
    # shifting the subject far off frame leaves only background pixels
    off = ModelParams(theta=params.theta, beta=params.beta,
                      camera=WeakPerspectiveCamera(scale=0.9, translation=(60.0, 60.0)))
    off_path = tmp_path / "off.json"
    assets.save_params(off, off_path)
    run_ok(["render", "--model", str(model_path), "--params", str(off_path),
            "--out", str(tmp_path / "bg")], capsys)
    assert np.asarray(Image.open(tmp_path / "bg_parts.png")).max() == 0
    run_ok(["render", "--model", str(model_path), "--params", str(params_path),
            "--out", str(tmp_path / "fg2")], capsys)
    assert (tmp_path / "fg_parts.png").read_bytes() == (tmp_path / "fg2_parts.png").read_bytes()
    assert (tmp_path / "fg_u.png").read_bytes() == (tmp_path / "fg2_u.png").read_bytes()


def test_eval_identical_inputs_score_zero(tmp_path, capsys):
    model_path = gen_body(tmp_path, capsys)
    model = assets.load_model(model_path)
    rng = np.random.default_rng(0)
    params = ModelParams(theta=rot.random_matrix(rng, size=22),
                         beta=rng.normal(size=model.n_shape),
                         camera=WeakPerspectiveCamera())
    params_path = tmp_path / "params.json"
    assets.save_params(params, params_path)
    mesh_path = tmp_path / "mesh.json"
    assets.save_mesh(pose_mesh(model, params).vertices, mesh_path)
    out_csv = tmp_path / "eval.csv"
    run_ok(["eval", "--model", str(model_path), "--pred", str(mesh_path),
            "--gt", str(params_path), "--out", str(out_csv)], capsys)
    header, rows = read_csv(out_csv)
    assert header == ["id", "mpjpe", "pa_mpjpe", "pve", "pa_pve"]
    assert len(rows) == 1
    assert all(float(v) == 0.0 for v in rows[0][1:])


def test_eval_requires_paired_files(tmp_path, capsys):
    model_path = gen_body(tmp_path, capsys)
    params_path = tmp_path / "params.json"
    assets.save_params(ModelParams(theta=np.broadcast_to(np.eye(3), (22, 3, 3)).copy(),
                                   beta=np.zeros(8), camera=WeakPerspectiveCamera()),
                       params_path)
    run_err(["eval", "--model", str(model_path), "--pred", str(params_path),
             "--out", str(tmp_path / "e.csv")], capsys)
    run_err(["eval", "--model", str(model_path), "--out", str(tmp_path / "e.csv")], capsys)


def test_eval_rejects_wrong_document(tmp_path, capsys):
    model_path = gen_body(tmp_path, capsys)
    msg = run_err(["eval", "--model", str(model_path), "--pred", str(model_path),
                   "--gt", str(model_path), "--out", str(tmp_path / "e.csv")], capsys)
    assert "cannot evaluate" in msg
