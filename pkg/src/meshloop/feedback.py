"""Iterative mesh-alignment feedback with trainable residual regressors.

The loop starts from mean parameters and refines them over a fixed number
of iterations. Iteration t samples the pyramid level of matching index:
the first iteration reads a regular grid of points, later iterations read
the projected vertices of the current mesh estimate, optionally enhanced
by scaled dot-product attention over the joint grid+mesh token set. Each
level owns a reducer, an attention block (t >= 1) and a residual MLP whose
final layer starts at zero, so an untrained loop is the identity.

Gradients are computed analytically (the module is its own tiny autograd:
every layer caches its forward inputs) and checked against central finite
differences in the tests. Sampling locations are treated as constants
during backprop; gradients flow through feature values and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .camera import WeakPerspectiveCamera
from .kinematics import ArticulatedModel, downsample, forward_kinematics, lbs, regress_joints, shape_blend
from .rotations import matrix_to_rot6d, rot6d_to_matrix
from .sampling import DEFAULT_GRID_SIZE, DEFAULT_REDUCE_DIM, FeaturePyramid, _bilinear_many, grid_points

DEFAULT_ITERATIONS = 3
DEFAULT_ATTENTION_DIM = 5
DEFAULT_HIDDEN_DIM = 256
DEFAULT_LEARNING_RATE = 5e-5
MIN_CAMERA_SCALE = 1e-3
CAMERA_DIM = 3


class Linear:
    """Dense layer y = x W^T + b caching its input for the backward pass."""

    def __init__(self, n_in: int, n_out: int, rng: Optional[np.random.Generator] = None,
                 zero: bool = False):
        if zero or rng is None:
            self.weight = np.zeros((n_out, n_in))
        else:
            self.weight = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in))
        self.bias = np.zeros(n_out)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.weight.shape[1]:
            raise ValueError(f"expected {self.weight.shape[1]} input features, got {x.shape[-1]}")
        self._x = x
        return x @ self.weight.T + self.bias

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        g = np.asarray(grad_out, dtype=float)
        gf = g.reshape(-1, g.shape[-1])
        xf = self._x.reshape(-1, self._x.shape[-1])
        self.grad_weight += gf.T @ xf
        self.grad_bias += gf.sum(axis=0)
        return g @ self.weight

    def named_parameters(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]

    def named_gradients(self, prefix: str):
        return [(f"{prefix}.weight", self.grad_weight), (f"{prefix}.bias", self.grad_bias)]

    def zero_grad(self):
        self.grad_weight[...] = 0.0
        self.grad_bias[...] = 0.0


class RegressorMLP:
    """Tanh MLP mapping (params, features) to a parameter residual.

    The output layer is zero-initialized so the untrained residual is
    exactly zero and the feedback loop starts as the identity.
    """

    def __init__(self, n_in: int, n_hidden: int, n_out: int,
                 rng: Optional[np.random.Generator] = None, n_hidden_layers: int = 2):
        if n_hidden_layers < 1:
            raise ValueError("need at least one hidden layer")
        dims = [n_in] + [n_hidden] * n_hidden_layers
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.layers.append(Linear(dims[-1], n_out, zero=True))
        self._acts = None

    @property
    def n_in(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.layers[-1].weight.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        self._acts = []
        for lin in self.layers[:-1]:
            h = np.tanh(lin.forward(h))
            self._acts.append(h)
        return self.layers[-1].forward(h)

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        g = self.layers[-1].backward(grad_out)
        for lin, a in zip(reversed(self.layers[:-1]), reversed(self._acts)):
            g = lin.backward(g * (1.0 - a * a))
        return g

    def named_parameters(self, prefix: str):
        out = []
        for i, lin in enumerate(self.layers):
            out.extend(lin.named_parameters(f"{prefix}.fc{i}"))
        return out

    def named_gradients(self, prefix: str):
        out = []
        for i, lin in enumerate(self.layers):
            out.extend(lin.named_gradients(f"{prefix}.fc{i}"))
        return out

    def zero_grad(self):
        for lin in self.layers:
            lin.zero_grad()


class AttentionWeights:
    """Query/key/value projections for one attention block."""

    def __init__(self, n_channels: int, n_attn: int = DEFAULT_ATTENTION_DIM,
                 rng: Optional[np.random.Generator] = None):
        if n_channels < 1 or n_attn < 1:
            raise ValueError("attention dimensions must be positive")
        scale = 1.0 / np.sqrt(n_channels)
        if rng is None:
            self.w_query = np.zeros((n_channels, n_attn))
            self.w_key = np.zeros((n_channels, n_attn))
            self.w_value = np.zeros((n_channels, n_attn))
        else:
            self.w_query = rng.normal(0.0, scale, size=(n_channels, n_attn))
            self.w_key = rng.normal(0.0, scale, size=(n_channels, n_attn))
            self.w_value = rng.normal(0.0, scale, size=(n_channels, n_attn))
        self.grad_query = np.zeros_like(self.w_query)
        self.grad_key = np.zeros_like(self.w_key)
        self.grad_value = np.zeros_like(self.w_value)

    @property
    def n_channels(self) -> int:
        return self.w_query.shape[0]

    @property
    def n_attn(self) -> int:
        return self.w_query.shape[1]

    def named_parameters(self, prefix: str):
        return [(f"{prefix}.query", self.w_query), (f"{prefix}.key", self.w_key),
                (f"{prefix}.value", self.w_value)]

    def named_gradients(self, prefix: str):
        return [(f"{prefix}.query", self.grad_query), (f"{prefix}.key", self.grad_key),
                (f"{prefix}.value", self.grad_value)]

    def zero_grad(self):
        self.grad_query[...] = 0.0
        self.grad_key[...] = 0.0
        self.grad_value[...] = 0.0


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _attention_forward(tokens: np.ndarray, w: AttentionWeights):
    tokens = np.asarray(tokens, dtype=float)
    if tokens.shape[-2] == 0:
        raise ValueError("attention needs a nonempty token set")
    if tokens.shape[-1] != w.n_channels:
        raise ValueError(f"tokens carry {tokens.shape[-1]} channels, weights expect {w.n_channels}")
    q = tokens @ w.w_query
    k = tokens @ w.w_key
    v = tokens @ w.w_value
    scale = 1.0 / np.sqrt(w.n_attn)
    attn = _softmax(scale * (q @ np.swapaxes(k, -1, -2)))
    return attn @ v, (tokens, q, k, v, attn)


def _attention_backward(grad_out: np.ndarray, w: AttentionWeights, cache) -> np.ndarray:
    tokens, q, k, v, attn = cache
    g = np.asarray(grad_out, dtype=float)
    scale = 1.0 / np.sqrt(w.n_attn)
    g_v = np.swapaxes(attn, -1, -2) @ g
    g_attn = g @ np.swapaxes(v, -1, -2)
    g_logits = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
    g_q = scale * (g_logits @ k)
    g_k = scale * (np.swapaxes(g_logits, -1, -2) @ q)
    tf = tokens.reshape(-1, tokens.shape[-1])
    w.grad_query += tf.T @ g_q.reshape(-1, g_q.shape[-1])
    w.grad_key += tf.T @ g_k.reshape(-1, g_k.shape[-1])
    w.grad_value += tf.T @ g_v.reshape(-1, g_v.shape[-1])
    return g_q @ w.w_query.T + g_k @ w.w_key.T + g_v @ w.w_value.T


def self_attention(tokens: np.ndarray, w: AttentionWeights) -> np.ndarray:
    """Scaled dot-product self-attention, (..., N, C) -> (..., N, C_a)."""
    out, _ = _attention_forward(tokens, w)
    return out


def fuse_grid_mesh(grid_feats: np.ndarray, mesh_feats: np.ndarray, w: AttentionWeights,
                   reducer=None) -> np.ndarray:
    """Attend over grid+mesh tokens, keep mesh rows, reduce and flatten.

    Grid tokens provide context only; the output covers the mesh-aligned
    points, one reduced block per point in input order.
    """
    grid_feats = np.asarray(grid_feats, dtype=float)
    mesh_feats = np.asarray(mesh_feats, dtype=float)
    if grid_feats.shape[-1] != mesh_feats.shape[-1]:
        raise ValueError("grid and mesh features must share the channel count")
    tokens = np.concatenate([grid_feats, mesh_feats], axis=-2)
    out = self_attention(tokens, w)
    mesh_out = out[..., grid_feats.shape[-2]:, :]
    if reducer is not None:
        mesh_out = reducer(mesh_out)
    return mesh_out.reshape(mesh_out.shape[:-2] + (-1,))


@dataclass
class LossWeights:
    """Nonnegative weights for the 2D, 3D and parameter loss terms."""

    lambda_2d: float = 0.0
    lambda_3d: float = 0.0
    lambda_para: float = 1.0

    def __post_init__(self):
        for name in ("lambda_2d", "lambda_3d", "lambda_para"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def regression_loss(pred: dict, target: dict, weights: LossWeights = None):
    """Weighted squared-L2 supervision on keypoints, joints and parameters.

    `pred` and `target` are mappings with any of the keys 'keypoints2d',
    'joints3d', 'params'. A term contributes only when its weight is
    nonzero and both sides carry the key. Returns (loss, grads) where
    grads holds the analytic gradient for each contributing pred entry.
    """
    weights = weights or LossWeights()
    terms = (("keypoints2d", weights.lambda_2d), ("joints3d", weights.lambda_3d),
             ("params", weights.lambda_para))
    loss = 0.0
    grads = {}
    for key, lam in terms:
        if lam == 0.0 or key not in pred or key not in target or target[key] is None:
            continue
        p = np.asarray(pred[key], dtype=float)
        t = np.asarray(target[key], dtype=float)
        if p.shape != t.shape:
            raise ValueError(f"{key}: prediction shape {p.shape} != target shape {t.shape}")
        d = p - t
        loss += lam * float((d * d).sum())
        grads[key] = 2.0 * lam * d
    return loss, grads


def param_vector_length(n_joints: int, n_shape: int) -> int:
    return 6 * n_joints + n_shape + CAMERA_DIM


def mean_param_vector(n_joints: int, n_shape: int) -> np.ndarray:
    """Identity rotations, zero shape, unit-scale centered camera."""
    vec = np.zeros(param_vector_length(n_joints, n_shape))
    six = np.tile([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], n_joints)
    vec[:6 * n_joints] = six
    vec[6 * n_joints + n_shape] = 1.0
    return vec


def encode_params(theta: np.ndarray, beta: np.ndarray, cam: np.ndarray) -> np.ndarray:
    """Pack rotations (as 6D), shape and camera into one flat vector."""
    theta = np.asarray(theta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cam = np.asarray(cam, dtype=float)
    if cam.shape[-1] != CAMERA_DIM:
        raise ValueError(f"camera block must have {CAMERA_DIM} entries, got {cam.shape[-1]}")
    r6 = matrix_to_rot6d(theta)
    flat = r6.reshape(r6.shape[:-2] + (-1,))
    return np.concatenate([flat, beta, cam], axis=-1)


def decode_params(vec: np.ndarray, n_joints: int, n_shape: int):
    """Unpack a parameter vector into (theta, beta, camera) arrays.

    The camera scale is clamped from below so downstream projection stays
    defined for arbitrary finite inputs.
    """
    vec = np.asarray(vec, dtype=float)
    d = param_vector_length(n_joints, n_shape)
    if vec.shape[-1] != d:
        raise ValueError(f"expected parameter vectors of length {d}, got {vec.shape[-1]}")
    r6 = vec[..., :6 * n_joints].reshape(vec.shape[:-1] + (n_joints, 6))
    theta = rot6d_to_matrix(r6)
    beta = vec[..., 6 * n_joints:6 * n_joints + n_shape]
    cam = vec[..., 6 * n_joints + n_shape:].copy()
    cam[..., 0] = np.maximum(cam[..., 0], MIN_CAMERA_SCALE)
    return theta, beta, cam


def camera_from_vector(cam: np.ndarray) -> WeakPerspectiveCamera:
    cam = np.asarray(cam, dtype=float)
    return WeakPerspectiveCamera(scale=float(max(cam[0], MIN_CAMERA_SCALE)),
                                 translation=cam[1:3].copy())


@dataclass
class FeedbackConfig:
    """Loop hyperparameters; defaults follow the published constants."""

    iterations: int = DEFAULT_ITERATIONS
    grid_size: int = DEFAULT_GRID_SIZE
    reduce_dim: int = DEFAULT_REDUCE_DIM
    attention_dim: int = DEFAULT_ATTENTION_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    use_attention: bool = True
    learning_rate: float = DEFAULT_LEARNING_RATE
    momentum: float = 0.9
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.grid_size < 2:
            raise ValueError("grid size must be at least 2")
        if min(self.reduce_dim, self.attention_dim, self.hidden_dim) < 1:
            raise ValueError("layer dimensions must be positive")
        if self.learning_rate < 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("invalid optimizer settings")


@dataclass
class LevelWeights:
    """Trainable blocks owned by one loop iteration."""

    attention: Optional[AttentionWeights]
    reducer: Linear
    mlp: RegressorMLP


class FeedbackWeights:
    """Per-level weights for the whole loop, seeded and reproducible."""

    def __init__(self, model: ArticulatedModel, n_channels: int,
                 config: Optional[FeedbackConfig] = None, seed: int = 0):
        self.config = config or FeedbackConfig()
        self.n_channels = int(n_channels)
        self.param_dim = param_vector_length(model.n_joints, model.n_shape)
        self.n_mesh_points = model.downsample_matrix.shape[0]
        self.n_grid_points = self.config.grid_size ** 2
        rng = np.random.default_rng(seed)
        self.token_channels = self.n_channels + 2
        self.levels = []
        for t in range(self.config.iterations):
            attn = None
            if t > 0 and self.config.use_attention:
                attn = AttentionWeights(self.token_channels, self.config.attention_dim, rng)
            red_in = self.config.attention_dim if attn is not None else self.token_channels
            reducer = Linear(red_in, self.config.reduce_dim, rng)
            n_pts = self.n_grid_points if t == 0 else self.n_mesh_points
            mlp = RegressorMLP(self.param_dim + n_pts * self.config.reduce_dim,
                               self.config.hidden_dim, self.param_dim, rng)
            self.levels.append(LevelWeights(attention=attn, reducer=reducer, mlp=mlp))

    def named_parameters(self):
        out = []
        for t, lw in enumerate(self.levels):
            if lw.attention is not None:
                out.extend(lw.attention.named_parameters(f"level{t}.attention"))
            out.extend(lw.reducer.named_parameters(f"level{t}.reducer"))
            out.extend(lw.mlp.named_parameters(f"level{t}.mlp"))
        return out

    def named_gradients(self):
        out = []
        for t, lw in enumerate(self.levels):
            if lw.attention is not None:
                out.extend(lw.attention.named_gradients(f"level{t}.attention"))
            out.extend(lw.reducer.named_gradients(f"level{t}.reducer"))
            out.extend(lw.mlp.named_gradients(f"level{t}.mlp"))
        return out

    def zero_grad(self):
        for lw in self.levels:
            if lw.attention is not None:
                lw.attention.zero_grad()
            lw.reducer.zero_grad()
            lw.mlp.zero_grad()

    def load_arrays(self, values: dict):
        """Overwrite parameters from a {name: array} mapping, in place."""
        own = dict(self.named_parameters())
        missing = set(own) - set(values)
        extra = set(values) - set(own)
        if missing or extra:
            raise ValueError(f"weight names mismatch; missing {sorted(missing)}, extra {sorted(extra)}")
        for name, arr in own.items():
            incoming = np.asarray(values[name], dtype=float)
            if incoming.shape != arr.shape:
                raise ValueError(f"{name}: shape {incoming.shape} != expected {arr.shape}")
            arr[...] = incoming


@dataclass
class LoopState:
    """One snapshot of the loop: parameters and derived geometry."""

    t: int
    params: np.ndarray
    vertices: np.ndarray
    joints3d: np.ndarray
    keypoints2d: np.ndarray
    mesh_points: np.ndarray
    losses: dict = field(default_factory=dict)


def _pose_batch(model: ArticulatedModel, vec: np.ndarray):
    """Decode, pose and project a batch of parameter vectors.

    Returns (vertices (B,V,3), joints3d (B,J,3), keypoints2d (B,J,2),
    mesh_points (B,Vd,2) in the normalized image frame).
    """
    theta, beta, cam = decode_params(vec, *_dims(model))
    shaped, rest = shape_blend(model, beta)
    posed = forward_kinematics(model.tree, theta, rest)
    verts = lbs(shaped, posed, model, rest)
    joints = regress_joints(model, verts)
    reduced = downsample(verts, model)
    scale = cam[..., None, :1]
    shift = cam[..., None, 1:3]
    keypoints = joints[..., :2] * scale + shift
    mesh_pts = reduced[..., :2] * scale + shift
    return verts, joints, keypoints, mesh_pts


def _dims(model: ArticulatedModel):
    return model.n_joints, model.n_shape


def _make_state(model: ArticulatedModel, t: int, vec: np.ndarray) -> LoopState:
    verts, joints, kp, mesh_pts = _pose_batch(model, vec[None])
    return LoopState(t=t, params=vec.copy(), vertices=verts[0], joints3d=joints[0],
                     keypoints2d=kp[0], mesh_points=mesh_pts[0])


def init_state(model: ArticulatedModel, params: Optional[np.ndarray] = None) -> LoopState:
    """Loop entry point at t=0; defaults to the mean parameters."""
    vec = mean_param_vector(*_dims(model)) if params is None else np.asarray(params, dtype=float)
    return _make_state(model, 0, vec)


def _with_coords(feats: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Append each point's sampling location to its channel vector.

    The location is treated as a constant in backward, like the sampled
    values; it lets the attention relate tokens across the frame instead
    of relying on slot order alone.
    """
    return np.concatenate([feats, pts], axis=-1)


def _step_forward(model: ArticulatedModel, weights: FeedbackWeights, t: int,
                  maps: np.ndarray, vec: np.ndarray, grid: np.ndarray,
                  mesh_pts: Optional[np.ndarray]):
    """One batched residual step. maps (B,C,H,W), vec (B,D). Returns
    (vec_next, attention cache or None)."""
    lw = weights.levels[t]
    b = vec.shape[0]
    grid_b = np.broadcast_to(grid, (b,) + grid.shape)
    cache = None
    if t == 0:
        red_in = _with_coords(_bilinear_many(maps, grid_b), grid_b)
    else:
        mesh_feats = _with_coords(_bilinear_many(maps, mesh_pts), mesh_pts)
        if lw.attention is not None:
            grid_feats = _with_coords(_bilinear_many(maps, grid_b), grid_b)
            tokens = np.concatenate([grid_feats, mesh_feats], axis=1)
            out, cache = _attention_forward(tokens, lw.attention)
            red_in = out[:, grid.shape[0]:, :]
        else:
            red_in = mesh_feats
    red = lw.reducer.forward(red_in)
    x = np.concatenate([vec, red.reshape(b, -1)], axis=1)
    residual = lw.mlp.forward(x)
    return vec + residual, cache


def _step_backward(weights: FeedbackWeights, t: int, grad_next: np.ndarray, cache) -> np.ndarray:
    """Backward through one residual step's trainable blocks.

    Accumulates weight gradients and returns the gradient reaching the
    step's parameter input (the residual identity path is added by the
    caller). Sampled feature values are treated as constants.
    """
    lw = weights.levels[t]
    b = grad_next.shape[0]
    g_x = lw.mlp.backward(grad_next)
    g_vec = g_x[:, :weights.param_dim]
    g_red = g_x[:, weights.param_dim:].reshape(b, -1, weights.config.reduce_dim)
    g_red_in = lw.reducer.backward(g_red)
    if cache is not None:
        tokens = cache[0]
        g_attn = np.zeros(tokens.shape[:-1] + (lw.attention.n_attn,))
        g_attn[:, tokens.shape[1] - g_red_in.shape[1]:, :] = g_red_in
        _attention_backward(g_attn, lw.attention, cache)
    return g_vec


def iterate(state: LoopState, pyramid: FeaturePyramid, model: ArticulatedModel,
            weights: FeedbackWeights) -> LoopState:
    """Advance the loop one iteration: Theta is updated by an additive
    residual, then the mesh and projections are recomputed."""
    cfg = weights.config
    if state.t >= cfg.iterations:
        raise ValueError(f"loop already finished ({state.t} of {cfg.iterations} iterations)")
    level = pyramid[state.t]
    if level.channels != weights.n_channels:
        raise ValueError(f"pyramid level has {level.channels} channels, weights expect {weights.n_channels}")
    grid = grid_points(cfg.grid_size).points
    vec_next, _ = _step_forward(model, weights, state.t, level.data[None],
                                state.params[None], grid, state.mesh_points[None])
    return _make_state(model, state.t + 1, vec_next[0])


def run_loop(model: ArticulatedModel, pyramid: FeaturePyramid, weights: FeedbackWeights,
             params: Optional[np.ndarray] = None):
    """Run all iterations; returns the T+1 states including the start."""
    if len(pyramid) < weights.config.iterations:
        raise ValueError(f"pyramid has {len(pyramid)} levels, need {weights.config.iterations}")
    states = [init_state(model, params)]
    for _ in range(weights.config.iterations):
        states.append(iterate(states[-1], pyramid, model, weights))
    return states


def _forward_vectors(model: ArticulatedModel, weights: FeedbackWeights, level_maps):
    """Batched loop over parameter vectors only. level_maps is a list of
    (B,C,H,W) arrays, one per iteration. Returns (vectors, caches)."""
    cfg = weights.config
    b = level_maps[0].shape[0]
    grid = grid_points(cfg.grid_size).points
    vec = np.broadcast_to(mean_param_vector(*_dims(model)), (b, weights.param_dim)).copy()
    vecs = [vec]
    caches = []
    for t in range(cfg.iterations):
        mesh_pts = None if t == 0 else _pose_batch(model, vecs[-1])[3]
        vec, cache = _step_forward(model, weights, t, level_maps[t], vecs[-1], grid, mesh_pts)
        vecs.append(vec)
        caches.append(cache)
    return vecs, caches


def _backward_vectors(weights: FeedbackWeights, vecs, caches, gt: np.ndarray, scale: float,
                      detach: bool = False):
    """Backpropagate L = scale * sum_t ||vec_t - gt||^2 (t = 1..T).

    With detach=True each iteration's weights see only their own loss
    term (stagewise training); otherwise gradients flow through the whole
    unrolled loop.
    """
    g = np.zeros_like(vecs[0])
    for t in reversed(range(weights.config.iterations)):
        g = g + 2.0 * scale * (vecs[t + 1] - gt)
        g_in = _step_backward(weights, t, g, caches[t])
        g = np.zeros_like(g) if detach else g + g_in
    return g


class _Momentum:
    """Plain SGD with momentum over the weight arrays, updating in place."""

    def __init__(self, weights: FeedbackWeights, lr: float, momentum: float):
        self.lr = lr
        self.momentum = momentum
        self.pairs = [(p, g) for (_, p), (_, g) in
                      zip(weights.named_parameters(), weights.named_gradients())]
        self.velocity = [np.zeros_like(p) for p, _ in self.pairs]

    def step(self):
        for v, (p, g) in zip(self.velocity, self.pairs):
            v *= self.momentum
            v += g
            p -= self.lr * v


class _Adam:
    """Adam with bias correction, matching the published optimizer choice."""

    def __init__(self, weights: FeedbackWeights, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.pairs = [(p, g) for (_, p), (_, g) in
                      zip(weights.named_parameters(), weights.named_gradients())]
        self.m = [np.zeros_like(p) for p, _ in self.pairs]
        self.v = [np.zeros_like(p) for p, _ in self.pairs]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for m, v, (p, g) in zip(self.m, self.v, self.pairs):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def stack_scenario_maps(scenarios, iterations: int):
    """Stack per-scenario pyramids into one (B,C,H,W) array per level."""
    if len(scenarios) == 0:
        raise ValueError("need at least one scenario")
    out = []
    for t in range(iterations):
        out.append(np.stack([np.asarray(s.pyramid[t].data, dtype=float) for s in scenarios]))
    return out


def train_toy(model: ArticulatedModel, scenarios, config: Optional[FeedbackConfig] = None,
              epochs: int = 40, learning_rate: Optional[float] = None,
              batch_size: Optional[int] = None, seed: int = 0,
              weights: Optional[FeedbackWeights] = None, optimizer: str = "momentum",
              weight_decay: float = 0.0, feature_noise: float = 0.0,
              detach: bool = False):
    """Fit the loop weights on synthetic scenarios with known parameters.

    Supervision is the squared parameter error at every iteration
    (lambda_para); the 2D/3D loss terms need gradients through the
    kinematic chain and are out of the toy trainer's scope. Full-batch
    gradient descent by default; a batch_size switches to seeded
    minibatch updates. optimizer is 'momentum' or 'adam'. weight_decay
    adds an L2 pull on the weights; feature_noise perturbs the feature
    maps freshly each step (seeded), fighting memorization of the small
    scenario set. Returns (weights, per-epoch mean loss history).
    """
    cfg = config or FeedbackConfig()
    lw = cfg.loss_weights
    if lw.lambda_2d != 0.0 or lw.lambda_3d != 0.0:
        raise ValueError("the toy trainer supervises parameters only; "
                         "set lambda_2d = lambda_3d = 0")
    if lw.lambda_para <= 0.0:
        raise ValueError("lambda_para must be positive to train")
    lr = cfg.learning_rate if learning_rate is None else float(learning_rate)
    if weights is None:
        n_channels = scenarios[0].pyramid[0].channels
        weights = FeedbackWeights(model, n_channels, cfg, seed=seed)
    cfg = weights.config
    level_maps = stack_scenario_maps(scenarios, cfg.iterations)
    gt = np.stack([np.asarray(s.gt_vector, dtype=float) for s in scenarios])
    n = gt.shape[0]
    if optimizer == "momentum":
        opt = _Momentum(weights, lr, cfg.momentum)
    elif optimizer == "adam":
        opt = _Adam(weights, lr)
    else:
        raise ValueError(f"optimizer must be 'momentum' or 'adam', got {optimizer!r}")
    rng = np.random.default_rng(seed)
    history = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n) if batch_size else np.arange(n)
        span = batch_size or n
        losses = []
        for lo in range(0, n, span):
            idx = order[lo:lo + span]
            weights.zero_grad()
            maps_b = [m[idx] for m in level_maps]
            if feature_noise > 0.0:
                maps_b = [m + rng.normal(scale=feature_noise, size=m.shape) for m in maps_b]
            vecs, caches = _forward_vectors(model, weights, maps_b)
            diffs = [v - gt[idx] for v in vecs[1:]]
            loss = lw.lambda_para * sum(float((d * d).sum()) for d in diffs) / len(idx)
            step += 1
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged at step {step}: loss is not finite")
            _backward_vectors(weights, vecs, caches, gt[idx],
                              lw.lambda_para / len(idx), detach=detach)
            if weight_decay > 0.0:
                for (_, p), (_, g) in zip(weights.named_parameters(), weights.named_gradients()):
                    g += weight_decay * p
            opt.step()
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return weights, history


def evaluate_pve(model: ArticulatedModel, scenarios, weights: FeedbackWeights):
    """Mean per-vertex error against ground truth at every iteration.

    Returns (means (T+1,), per_scenario (B, T+1)); index 0 is the error
    of the mean-parameter initialization.
    """
    cfg = weights.config
    level_maps = stack_scenario_maps(scenarios, cfg.iterations)
    gt = np.stack([np.asarray(s.gt_vector, dtype=float) for s in scenarios])
    vecs, _ = _forward_vectors(model, weights, level_maps)
    gt_verts = _pose_batch(model, gt)[0]
    rows = []
    for v in vecs:
        verts = _pose_batch(model, v)[0]
        rows.append(np.linalg.norm(verts - gt_verts, axis=-1).mean(axis=-1))
    per_scenario = np.stack(rows, axis=-1)
    return per_scenario.mean(axis=0), per_scenario
