import numpy as np
import pytest

from meshloop import camera as cam


def test_weak_projection_is_scale_then_shift():
    c = cam.WeakPerspectiveCamera(scale=2.0, translation=[0.1, -0.3])
    pts = np.array([[0.5, -1.0, 4.0], [0.0, 0.0, -2.0]])
    out = cam.project_weak(pts, c)
    assert np.allclose(out, [[1.1, -2.3], [0.1, -0.3]], atol=1e-15)


def test_weak_projection_ignores_depth():
    c = cam.WeakPerspectiveCamera(scale=0.7)
    rng = np.random.default_rng(0)
    p = rng.standard_normal((50, 3))
    q = p.copy()
    q[:, 2] = rng.standard_normal(50)
    assert np.array_equal(cam.project_weak(p, c), cam.project_weak(q, c))


def test_weak_camera_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        cam.WeakPerspectiveCamera(scale=0.0)
    with pytest.raises(ValueError):
        cam.WeakPerspectiveCamera(scale=-1.0)


def test_camera_depth_is_raw_z():
    c = cam.WeakPerspectiveCamera()
    p = np.array([[1.0, 2.0, 3.5], [0.0, 0.0, -1.25]])
    assert np.array_equal(cam.camera_depth(p, c), [3.5, -1.25])


def test_align_corners_pixel_mapping_hits_corners():
    corners = np.array([[-1.0, -1.0], [1.0, 1.0], [1.0, -1.0]])
    px = cam.normalized_to_pixels(corners, 56, 28)
    assert np.allclose(px, [[0.0, 0.0], [55.0, 27.0], [55.0, 0.0]], atol=1e-15)


def test_pixel_mapping_round_trips():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.0, 1.0, size=(200, 2))
    back = cam.pixels_to_normalized(cam.normalized_to_pixels(pts, 33, 17), 33, 17)
    assert np.abs(back - pts).max() < 1e-12


def test_perspective_projection_known_point():
    c = cam.PerspectiveCamera(focal=[100.0, 100.0], principal_point=[28.0, 28.0])
    out = cam.project_persp(np.array([[0.5, -0.25, 2.0]]), c)
    assert np.allclose(out, [[28.0 + 25.0, 28.0 - 12.5]], atol=1e-12)


def test_perspective_projection_applies_extrinsics():
    # 90 degree yaw moves a point from +x onto the optical axis
    r = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    c = cam.PerspectiveCamera(rotation=r, translation=[0.0, 0.0, 0.0])
    out = cam.project_persp(np.array([[3.0, 0.0, 0.0]]), c)
    assert np.allclose(out, [[0.0, 0.0]], atol=1e-12)


def test_perspective_rejects_points_behind_camera():
    c = cam.PerspectiveCamera()
    with pytest.raises(ValueError):
        cam.project_persp(np.array([[0.0, 0.0, -1.0]]), c)
    with pytest.raises(ValueError):
        cam.project_persp(np.array([[0.0, 0.0, 0.0]]), c)


def test_recenter_moves_centroid_exactly():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((40, 2)) + 5.0
    out = cam.recenter(pts, [0.25, -0.5])
    assert np.abs(out.mean(axis=0) - [0.25, -0.5]).max() < 1e-12
    # relative layout is untouched
    assert np.abs((out - out.mean(axis=0)) - (pts - pts.mean(axis=0))).max() < 1e-12
