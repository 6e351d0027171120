import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
kw = dict(pose_sigma=0.05, orient_sigma=0.1, shape_sigma=0.25,
          noise=(0.05, 0.01, 0.002), camera_scale=0.9, camera_sigma=0.08)
train = make_scenarios(model, 40, base_seed=0, **kw)
cfg = fb.FeedbackConfig(hidden_dim=96, grid_size=11)
w, hist = fb.train_toy(model, train, cfg, epochs=6, learning_rate=1.5e-3,
                       batch_size=20, seed=0, optimizer="adam")
arrs = [p for _, p in w.named_parameters()]
import hashlib
h = hashlib.sha256()
for a in arrs:
    h.update(a.tobytes())
print("history:", " ".join(f"{x:.17g}" for x in hist))
print("weights sha:", h.hexdigest()[:16])
