import time
import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
t0 = time.time()
kw = dict(pose_sigma=0.05, orient_sigma=0.1, shape_sigma=0.25,
          noise=(0.05, 0.01, 0.002), camera_scale=0.9, camera_sigma=0.08)
train = make_scenarios(model, 200, base_seed=0, **kw)
held_a = make_scenarios(model, 40, base_seed=1000, **kw)
held_b = make_scenarios(model, 40, base_seed=10_000, **kw)
print(f"setup {time.time()-t0:.1f}s", flush=True)

cfg = fb.FeedbackConfig(hidden_dim=96, grid_size=11)
w, hist = fb.train_toy(model, train, cfg, epochs=40, learning_rate=1.5e-3,
                       batch_size=20, seed=0, optimizer="adam")
for tag, held in [("seed1000 ", held_a), ("seed10000", held_b)]:
    m, _ = fb.evaluate_pve(model, held, w)
    print(tag + ": held " + " ".join(f"{x*1000:.1f}" for x in m) +
          f"  ratio {m[3]/m[1]:.3f}", flush=True)
tm, _ = fb.evaluate_pve(model, train[:40], w)
print("train    : " + " ".join(f"{x*1000:.1f}" for x in tm), flush=True)
