import time
import numpy as np
from meshloop import feedback as fb
from meshloop.sampling import FeaturePyramid, grid_points
from meshloop.toybody import toy_hand_model

rng = np.random.default_rng(0)

# --- MLP FD check
mlp = fb.RegressorMLP(7, 9, 4, rng)
x = rng.normal(size=(3, 7))
gout = rng.normal(size=(3, 4))
def loss_mlp():
    return float((mlp.forward(x) * gout).sum())
base = loss_mlp()
mlp.zero_grad()
mlp.forward(x)
gx = mlp.backward(gout)
eps = 1e-5
worst = 0.0
for name, p in mlp.named_parameters("m"):
    g = dict(mlp.named_gradients("m"))[name]
    for _ in range(10):
        i = tuple(rng.integers(0, s) for s in p.shape)
        old = p[i]
        p[i] = old + eps; lp = loss_mlp()
        p[i] = old - eps; lm = loss_mlp()
        p[i] = old
        fd = (lp - lm) / (2 * eps)
        denom = max(abs(fd), abs(g[i]), 1e-8)
        worst = max(worst, abs(fd - g[i]) / denom)
# input grad
for _ in range(10):
    i = tuple(rng.integers(0, s) for s in x.shape)
    old = x[i]
    x[i] = old + eps; lp = loss_mlp()
    x[i] = old - eps; lm = loss_mlp()
    x[i] = old
    fd = (lp - lm) / (2 * eps)
    worst = max(worst, abs(fd - gx[i]) / max(abs(fd), abs(gx[i]), 1e-8))
print("mlp FD worst rel err:", worst)

# --- attention FD check
w = fb.AttentionWeights(6, 4, rng)
tok = rng.normal(size=(2, 8, 6))
gout_a = rng.normal(size=(2, 8, 4))
def loss_attn():
    return float((fb.self_attention(tok, w) * gout_a).sum())
w.zero_grad()
out, cache = fb._attention_forward(tok, w)
gtok = fb._attention_backward(gout_a, w, cache)
worst_a = 0.0
for name, p in w.named_parameters("a"):
    g = dict(w.named_gradients("a"))[name]
    for _ in range(12):
        i = tuple(rng.integers(0, s) for s in p.shape)
        old = p[i]
        p[i] = old + eps; lp = loss_attn()
        p[i] = old - eps; lm = loss_attn()
        p[i] = old
        fd = (lp - lm) / (2 * eps)
        worst_a = max(worst_a, abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8))
for _ in range(12):
    i = tuple(rng.integers(0, s) for s in tok.shape)
    old = tok[i]
    tok[i] = old + eps; lp = loss_attn()
    tok[i] = old - eps; lm = loss_attn()
    tok[i] = old
    fd = (lp - lm) / (2 * eps)
    worst_a = max(worst_a, abs(fd - gtok[i]) / max(abs(fd), abs(gtok[i]), 1e-8))
print("attention FD worst rel err:", worst_a)

# row stochastic + convex hull
s = fb._softmax(rng.normal(size=(4, 9, 9)))
print("softmax rows sum:", np.abs(s.sum(-1) - 1).max())

# single token / identical tokens
w1 = fb.AttentionWeights(5, 3, rng)
t1 = rng.normal(size=(1, 5))
print("single token == value proj:", np.allclose(fb.self_attention(t1, w1), t1 @ w1.w_value))
t2 = np.tile(t1, (2, 1))
o2 = fb.self_attention(t2, w1)
print("identical tokens symmetric:", np.allclose(o2[0], o2[1]))

# fuse permutation invariance of grid tokens
gf = rng.normal(size=(10, 5))
mf = rng.normal(size=(4, 5))
f1 = fb.fuse_grid_mesh(gf, mf, w1)
perm = rng.permutation(10)
f2 = fb.fuse_grid_mesh(gf[perm], mf, w1)
print("grid permutation invariance:", np.abs(f1 - f2).max())

# zero attention weights -> uniform averaging
w0 = fb.AttentionWeights(5, 3)
o0 = fb.self_attention(t2, w0)
print("zero QK -> uniform avg:", np.allclose(o0[0], (t2 @ w0.w_value).mean(0)))

# --- regression loss
lw = fb.LossWeights(lambda_2d=1.0, lambda_3d=0.0, lambda_para=0.0)
pred = {"keypoints2d": np.array([[0.0, 0.0], [3.0, 4.0]])}
gt = {"keypoints2d": np.zeros((2, 2))}
l, g = fb.regression_loss(pred, gt, lw)
print("one keypoint off (3,4):", l, "grad ok:", np.allclose(g["keypoints2d"][1], [6.0, 8.0]))
l0, g0 = fb.regression_loss(pred, pred, lw)
print("pred == gt -> 0:", l0, list(g0))

# --- codec round trip
from meshloop import rotations as rot
J, S = 5, 3
theta = rot.random_matrix(rng, (J,))
beta = rng.normal(size=S)
cam = np.array([0.8, 0.1, -0.2])
vec = fb.encode_params(theta, beta, cam)
th2, b2, c2 = fb.decode_params(vec, J, S)
print("codec round trip:", np.abs(th2 - theta).max(), np.abs(b2 - beta).max(), np.abs(c2 - cam).max())
print("mean vec decodes to identity:", np.abs(fb.decode_params(fb.mean_param_vector(J, S), J, S)[0] - np.eye(3)).max())
clamped = vec.copy(); clamped[6*J+S] = -5.0
print("scale clamp:", fb.decode_params(clamped, J, S)[2][0] == fb.MIN_CAMERA_SCALE)

# --- full loop FD check on a tiny config with a real model
model = toy_hand_model(seed=1)
cfg = fb.FeedbackConfig(iterations=3, grid_size=4, reduce_dim=2, attention_dim=3, hidden_dim=10)
weights = fb.FeedbackWeights(model, n_channels=4, config=cfg, seed=3)
B = 2
maps = [rng.normal(size=(B, 4, r, r)) for r in (6, 12, 24)]
gtv = np.stack([fb.mean_param_vector(*fb._dims(model)) + 0.1 * rng.normal(size=weights.param_dim) for _ in range(B)])

def full_loss():
    vecs, _ = fb._forward_vectors(model, weights, maps)
    return sum(float(((v - gtv) ** 2).sum()) for v in vecs[1:]) / B

weights.zero_grad()
vecs, caches = fb._forward_vectors(model, weights, maps)
fb._backward_vectors(weights, vecs, caches, gtv, 1.0 / B)
worst_f = 0.0
checked = 0
t0 = time.time()
for name, p in weights.named_parameters():
    g = dict(weights.named_gradients())[name]
    for _ in range(4):
        i = tuple(rng.integers(0, s) for s in p.shape)
        old = p[i]
        p[i] = old + eps; lp = full_loss()
        p[i] = old - eps; lm = full_loss()
        p[i] = old
        fd = (lp - lm) / (2 * eps)
        if abs(fd) < 1e-10 and abs(g[i]) < 1e-10:
            continue
        rel = abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8)
        if rel > worst_f:
            worst_f = rel; worst_name = name
        checked += 1
print(f"full-loop FD worst rel err: {worst_f:.3e} over {checked} entries ({time.time()-t0:.1f}s) at {worst_name if worst_f else '-'}")

# zero-weight regressor -> identity loop
w_id = fb.FeedbackWeights(model, n_channels=4, config=cfg, seed=5)
pyr = FeaturePyramid([rng.normal(size=(4, r, r)) for r in (6, 12, 24)])
states = fb.run_loop(model, pyr, w_id)
print("T+1 states:", len(states), "zero residual -> params frozen:",
      max(np.abs(s.params - states[0].params).max() for s in states) == 0.0)

# wait: fresh FeedbackWeights has zero FINAL layer but the loop must then be identity
# lr = 0 training leaves weights unchanged
class Scen:
    def __init__(self, pyramid, gt_vector):
        self.pyramid, self.gt_vector = pyramid, gt_vector
scens = [Scen(pyr, gtv[0]), Scen(FeaturePyramid([m[1] for m in maps]), gtv[1])]
before = [p.copy() for _, p in w_id.named_parameters()]
w2, hist = fb.train_toy(model, scens, cfg, epochs=3, learning_rate=0.0, weights=w_id)
after = [p for _, p in w_id.named_parameters()]
print("lr=0 unchanged:", all(np.array_equal(a, b) for a, b in zip(before, after)), "history len:", len(hist))

# a few real steps decrease the loss
w3, hist3 = fb.train_toy(model, scens, cfg, epochs=40, learning_rate=1e-3, seed=11)
print("training loss start -> end:", hist3[0], "->", hist3[-1], "decreased:", hist3[-1] < hist3[0])

# evaluate_pve shape
means, per = fb.evaluate_pve(model, scens, w3)
print("pve means shape:", means.shape, "per-scenario:", per.shape)

# iterate matches batched forward (consistency of inference vs training path)
vecs, _ = fb._forward_vectors(model, w3, [m[:1] for m in maps])
states = fb.run_loop(model, FeaturePyramid([m[0] for m in maps]), w3)
print("iterate vs batched forward:", max(np.abs(s.params - v[0]).max() for s, v in zip(states, vecs)))
