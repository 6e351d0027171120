import sys
import time
import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

lr = float(sys.argv[1]) if len(sys.argv) > 1 else 3e-3
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 30
batch = int(sys.argv[3]) if len(sys.argv) > 3 else 20
hidden = int(sys.argv[4]) if len(sys.argv) > 4 else 256
grid = int(sys.argv[5]) if len(sys.argv) > 5 else 11
opt = sys.argv[6] if len(sys.argv) > 6 else "adam"

t0 = time.time()
model = toy_body_model(seed=0)
train = make_scenarios(model, 200, base_seed=0)
held = make_scenarios(model, 40, base_seed=1000)
t1 = time.time()
print(f"setup {t1-t0:.1f}s")

cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid)
w, hist = fb.train_toy(model, train, cfg, epochs=epochs, learning_rate=lr, batch_size=batch, seed=0, optimizer=opt)
t2 = time.time()
print(f"train {t2-t1:.1f}s  steps={epochs*int(np.ceil(200/batch))}  loss {hist[0]:.4f} -> {hist[-1]:.4f}")
print("loss curve:", " ".join(f"{h:.3f}" for h in hist[:: max(1, len(hist)//10)]))

means, per = fb.evaluate_pve(model, held, w)
t3 = time.time()
print(f"eval {t3-t2:.1f}s")
print("held-out M:", " ".join(f"{m*1000:.1f}mm" for m in means))
m = means
ok = m[0] > m[1] > m[2] >= m[3] and m[3] < 0.5 * m[1]
print(f"trend ok: {ok}   M3/M1 = {m[3]/m[1]:.3f}   total {t3-t0:.1f}s")

tr_means, _ = fb.evaluate_pve(model, train[:40], w)
print("train-set M:", " ".join(f"{x*1000:.1f}mm" for x in tr_means))

# per-block parameter errors on held-out
maps = fb.stack_scenario_maps(held, w.config.iterations)
gt = np.stack([s.gt_vector for s in held])
vecs, _ = fb._forward_vectors(model, w, maps)
J = model.n_joints
S = model.n_shape
for t, v in enumerate(vecs):
    d = v - gt
    orient = np.abs(d[:, :6]).mean()
    pose = np.abs(d[:, 6:6*J]).mean()
    beta = np.abs(d[:, 6*J:6*J+S]).mean()
    cam = np.abs(d[:, 6*J+S:]).mean()
    print(f"  t={t}: |d6 root|={orient:.4f} |d6 pose|={pose:.4f} |dbeta|={beta:.4f} |dcam|={cam:.4f}")
