import numpy as np
import pytest

from meshloop import metrics as met
from meshloop import rotations as rot


def test_mpjpe_known_value():
    pred = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
    gt = np.zeros((2, 3))
    assert abs(met.mpjpe(pred, gt) - 2.5) < 1e-12
    assert met.pve(pred, gt) == met.mpjpe(pred, gt)


def test_paired_validation():
    with pytest.raises(ValueError):
        met.mpjpe(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        met.mpjpe(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        met.mpjpe(np.zeros((0, 3)), np.zeros((0, 3)))


def test_procrustes_recovers_constructed_similarity():
    rng = np.random.default_rng(0)
    pred = rng.standard_normal((30, 3))
    r = rot.random_matrix(rng)
    s = 1.7
    t = np.array([0.3, -1.2, 0.8])
    gt = s * pred @ r.T + t
    a = met.procrustes(pred, gt)
    assert np.abs(a.rotation - r).max() < 1e-9
    assert abs(a.scale - s) < 1e-9
    assert np.abs(a.translation - t).max() < 1e-9
    assert a.residual_rmse < 1e-9


def test_procrustes_reflection_still_returns_proper_rotation():
    rng = np.random.default_rng(1)
    pred = rng.standard_normal((25, 3))
    gt = pred.copy()
    gt[:, 2] *= -1.0
    a = met.procrustes(pred, gt)
    assert abs(np.linalg.det(a.rotation) - 1.0) < 1e-9


def test_procrustes_rejects_degenerate_input():
    line = np.outer(np.arange(5.0), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        met.procrustes(line, line)
    with pytest.raises(ValueError):
        met.procrustes(np.zeros((2, 3)), np.zeros((2, 3)))


def test_pa_is_never_worse_than_raw():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pred = rng.standard_normal((12, 3))
        gt = rng.standard_normal((12, 3))
        assert met.pa_mpjpe(pred, gt) <= met.mpjpe(pred, gt) + 1e-12


def test_apply_alignment_matches_procrustes_residual():
    rng = np.random.default_rng(3)
    pred = rng.standard_normal((15, 3))
    gt = rng.standard_normal((15, 3))
    a = met.procrustes(pred, gt)
    aligned = met.apply_alignment(pred, a)
    rmse = float(np.sqrt(((aligned - gt) ** 2).sum(axis=1).mean()))
    assert abs(rmse - a.residual_rmse) < 1e-12


def test_oks_perfect_and_distance_falloff():
    gt = np.array([[0.0, 0.0], [1.0, 1.0]])
    sig = np.array([0.5, 0.5])
    assert abs(met.oks(gt, gt, 1.0, sig) - 1.0) < 1e-12
    pred = gt + np.array([[0.5, 0.0], [0.0, 0.0]])
    expect = 0.5 * (np.exp(-0.25 / (2.0 * 0.25)) + 1.0)
    assert abs(met.oks(pred, gt, 1.0, sig) - expect) < 1e-12


def test_oks_labeled_mask_selects_keypoints():
    gt = np.zeros((3, 2))
    pred = np.array([[10.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    sig = np.full(3, 0.5)
    full = met.oks(pred, gt, 1.0, sig)
    masked = met.oks(pred, gt, 1.0, sig, labeled=[False, True, True])
    assert masked > full
    assert abs(masked - 1.0) < 1e-12


def test_oks_validation():
    gt = np.zeros((2, 2))
    with pytest.raises(ValueError):
        met.oks(gt, gt, 0.0, np.full(2, 0.5))
    with pytest.raises(ValueError):
        met.oks(gt, gt, 1.0, np.full(3, 0.5))
    with pytest.raises(ValueError):
        met.oks(gt, gt, 1.0, np.full(2, 0.5), labeled=[False, False])
