import numpy as np
import pytest

from meshloop import feedback as fb
from meshloop import rotations as rot
from meshloop.sampling import FeaturePyramid
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

SMALL_CFG = fb.FeedbackConfig(grid_size=4, reduce_dim=3, attention_dim=4, hidden_dim=8)


def small_setup(seed=0, n=2, cfg=SMALL_CFG):
    model = toy_body_model(seed=0, downsample_count=60)
    scenarios = make_scenarios(model, n, base_seed=seed)
    weights = fb.FeedbackWeights(model, scenarios[0].pyramid[0].channels, cfg, seed=seed)
    return model, scenarios, weights


def test_param_vector_round_trip():
    rng = np.random.default_rng(0)
    theta = rot.random_matrix(rng, size=5)
    beta = rng.standard_normal(3)
    cam = np.array([0.9, 0.1, -0.2])
    vec = fb.encode_params(theta, beta, cam)
    assert vec.shape == (fb.param_vector_length(5, 3),)
    theta2, beta2, cam2 = fb.decode_params(vec, 5, 3)
    assert rot.geodesic_distance(theta, theta2).max() < 1e-9
    assert np.abs(beta - beta2).max() < 1e-12
    assert np.abs(cam - cam2).max() < 1e-12


def test_decode_clamps_camera_scale():
    vec = fb.mean_param_vector(2, 1)
    vec[-3] = -5.0
    _, _, cam = fb.decode_params(vec, 2, 1)
    assert cam[0] == fb.MIN_CAMERA_SCALE


def test_mean_vector_decodes_to_identity_pose():
    theta, beta, cam = fb.decode_params(fb.mean_param_vector(4, 2), 4, 2)
    assert np.abs(theta - np.eye(3)).max() < 1e-12
    assert np.all(beta == 0.0)
    assert np.allclose(cam, [1.0, 0.0, 0.0])


def test_regression_loss_terms_and_grads():
    pred = {"params": np.array([1.0, 2.0]), "joints3d": np.ones((2, 3))}
    target = {"params": np.array([0.0, 0.0]), "joints3d": np.zeros((2, 3))}
    w = fb.LossWeights(lambda_2d=0.0, lambda_3d=0.5, lambda_para=2.0)
    loss, grads = fb.regression_loss(pred, target, w)
    assert abs(loss - (2.0 * 5.0 + 0.5 * 6.0)) < 1e-12
    assert np.allclose(grads["params"], [4.0, 8.0])
    assert np.allclose(grads["joints3d"], 1.0)
    assert "keypoints2d" not in grads


def test_regression_loss_shape_mismatch_raises():
    with pytest.raises(ValueError):
        fb.regression_loss({"params": np.zeros(2)}, {"params": np.zeros(3)})


def test_attention_rows_stay_in_value_convex_hull():
    rng = np.random.default_rng(1)
    w = fb.AttentionWeights(6, 4, rng)
    tokens = rng.standard_normal((10, 6))
    out = fb.self_attention(tokens, w)
    values = tokens @ w.w_value
    lo = values.min(axis=0) - 1e-12
    hi = values.max(axis=0) + 1e-12
    assert np.all(out >= lo) and np.all(out <= hi)


def test_attention_zero_query_key_averages_values():
    rng = np.random.default_rng(2)
    w = fb.AttentionWeights(5, 3, rng)
    w.w_query[...] = 0.0
    w.w_key[...] = 0.0
    tokens = rng.standard_normal((7, 5))
    out = fb.self_attention(tokens, w)
    mean_value = (tokens @ w.w_value).mean(axis=0)
    assert np.abs(out - mean_value).max() < 1e-12


def test_attention_single_token_returns_its_value():
    rng = np.random.default_rng(3)
    w = fb.AttentionWeights(5, 3, rng)
    token = rng.standard_normal((1, 5))
    out = fb.self_attention(token, w)
    assert np.abs(out - token @ w.w_value).max() < 1e-12


def test_attention_empty_token_set_raises():
    w = fb.AttentionWeights(4, 2)
    with pytest.raises(ValueError):
        fb.self_attention(np.zeros((0, 4)), w)


def test_fuse_grid_mesh_keeps_mesh_rows_only():
    rng = np.random.default_rng(4)
    w = fb.AttentionWeights(6, 4, rng)
    grid = rng.standard_normal((5, 6))
    mesh = rng.standard_normal((8, 6))
    fused = fb.fuse_grid_mesh(grid, mesh, w)
    assert fused.shape == (8 * 4,)
    full = fb.self_attention(np.concatenate([grid, mesh], axis=0), w)
    assert np.abs(fused - full[5:].reshape(-1)).max() < 1e-12


def test_untrained_loop_is_identity():
    model, scenarios, weights = small_setup()
    states = fb.run_loop(model, scenarios[0].pyramid, weights)
    assert len(states) == weights.config.iterations + 1
    for s in states[1:]:
        assert np.array_equal(s.params, states[0].params)
        assert np.abs(s.vertices - states[0].vertices).max() == 0.0


def test_iterate_past_the_last_level_raises():
    model, scenarios, weights = small_setup()
    state = fb.init_state(model)
    for _ in range(weights.config.iterations):
        state = fb.iterate(state, scenarios[0].pyramid, model, weights)
    with pytest.raises(ValueError):
        fb.iterate(state, scenarios[0].pyramid, model, weights)


def test_iterate_checks_channel_count():
    model, scenarios, weights = small_setup()
    thin = FeaturePyramid([lv.data[:3] for lv in scenarios[0].pyramid.levels])
    with pytest.raises(ValueError):
        fb.iterate(fb.init_state(model), thin, model, weights)


def test_run_loop_matches_manual_iterates():
    model, scenarios, weights = small_setup()
    rng = np.random.default_rng(5)
    for _, arr in weights.named_parameters():
        arr += 0.01 * rng.standard_normal(arr.shape)
    states = fb.run_loop(model, scenarios[0].pyramid, weights)
    state = fb.init_state(model)
    for t in range(weights.config.iterations):
        state = fb.iterate(state, scenarios[0].pyramid, model, weights)
        assert np.array_equal(state.params, states[t + 1].params)


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    mlp = fb.RegressorMLP(7, 5, 4, rng)
    for _, arr in mlp.named_parameters("m"):
        arr += 0.05 * rng.standard_normal(arr.shape)
    x = rng.standard_normal((3, 7))
    probe = rng.standard_normal((3, 4))
    mlp.zero_grad()
    out = mlp.forward(x)
    mlp.backward(probe)
    analytic = dict(mlp.named_gradients("m"))
    eps = 1e-6
    for name, arr in mlp.named_parameters("m"):
        g = analytic[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = arr[i]
            arr[i] = orig + eps
            hi = float((mlp.forward(x) * probe).sum())
            arr[i] = orig - eps
            lo = float((mlp.forward(x) * probe).sum())
            arr[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            assert abs(fd - g[i]) < 1e-5 * max(1.0, abs(g[i])), name


def test_train_toy_reduces_loss_and_is_deterministic():
    model, scenarios, _ = small_setup(n=3)
    kw = dict(config=SMALL_CFG, epochs=8, learning_rate=1e-3, seed=0, optimizer="adam")
    w1, h1 = fb.train_toy(model, scenarios, **kw)
    w2, h2 = fb.train_toy(model, scenarios, **kw)
    assert h1[-1] < h1[0]
    assert h1 == h2
    for (n1, a1), (n2, a2) in zip(w1.named_parameters(), w2.named_parameters()):
        assert n1 == n2 and np.array_equal(a1, a2)


def test_train_toy_zero_learning_rate_is_a_no_op():
    model, scenarios, weights = small_setup(n=2)
    before = [a.copy() for _, a in weights.named_parameters()]
    fb.train_toy(model, scenarios, weights=weights, epochs=2, learning_rate=0.0)
    for b, (_, a) in zip(before, weights.named_parameters()):
        assert np.array_equal(b, a)


def test_train_toy_rejects_unsupported_losses():
    model, scenarios, _ = small_setup(n=1)
    with pytest.raises(ValueError):
        cfg = fb.FeedbackConfig(grid_size=4, hidden_dim=8,
                                loss_weights=fb.LossWeights(lambda_2d=1.0))
        fb.train_toy(model, scenarios, config=cfg, epochs=1)
    with pytest.raises(ValueError):
        fb.train_toy(model, scenarios, config=SMALL_CFG, epochs=1, optimizer="sgd")


def test_evaluate_pve_shapes_and_identity_loop():
    model, scenarios, weights = small_setup(n=3)
    means, per_scenario = fb.evaluate_pve(model, scenarios, weights)
    t = weights.config.iterations
    assert means.shape == (t + 1,)
    assert per_scenario.shape == (3, t + 1)
    # untrained loop: every iteration repeats the initialization error
    assert np.abs(per_scenario - per_scenario[:, :1]).max() == 0.0


def test_load_arrays_rejects_name_and_shape_mismatch():
    model, _, weights = small_setup(n=1)
    good = dict(weights.named_parameters())
    bad = dict(good)
    bad.pop(sorted(bad)[0])
    with pytest.raises(ValueError):
        weights.load_arrays(bad)
    wrong = {k: (v if i else np.zeros((1, 1))) for i, (k, v) in enumerate(sorted(good.items()))}
    with pytest.raises(ValueError):
        weights.load_arrays(wrong)


def test_feedback_config_validation():
    with pytest.raises(ValueError):
        fb.FeedbackConfig(iterations=0)
    with pytest.raises(ValueError):
        fb.FeedbackConfig(grid_size=1)
    with pytest.raises(ValueError):
        fb.FeedbackConfig(reduce_dim=0)
    with pytest.raises(ValueError):
        fb.FeedbackConfig(momentum=1.0)


def test_camera_from_vector_clamps_scale():
    cam = fb.camera_from_vector(np.array([-1.0, 0.2, 0.3]))
    assert cam.scale == fb.MIN_CAMERA_SCALE
    assert np.allclose(cam.translation, [0.2, 0.3])
