import sys
import time

import numpy as np

from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

small = toy_body_model(seed=0, downsample_count=160)

noise_arg = sys.argv[1] if len(sys.argv) > 1 else "0.04"
noise = tuple(float(x) for x in noise_arg.split(",")) if "," in noise_arg else float(noise_arg)
n_train = int(sys.argv[2]) if len(sys.argv) > 2 else 60
csig = float(sys.argv[3]) if len(sys.argv) > 3 else 0.08
osig = float(sys.argv[4]) if len(sys.argv) > 4 else 0.25
kw = dict(noise=noise, pose_sigma=0.03, orient_sigma=osig, shape_sigma=0.25,
          camera_scale=0.8, camera_sigma=csig)
tr = make_scenarios(small, n_train, base_seed=20_000, **kw)
he = make_scenarios(small, 40, base_seed=60_000, **kw)

for attn in (True, False):
    cfg = fb.FeedbackConfig(hidden_dim=int(sys.argv[6]) if len(sys.argv) > 6 else 48,
                            grid_size=int(sys.argv[5]) if len(sys.argv) > 5 else 5,
                            use_attention=attn)
    w = None
    t0 = time.time()
    row = []
    for chunk in range(12):
        w, _ = fb.train_toy(small, tr, config=cfg, epochs=25, learning_rate=float(sys.argv[7]) if len(sys.argv) > 7 else 2e-3,
                            batch_size=20, seed=0, optimizer="adam", weights=w)
        m, _ = fb.evaluate_pve(small, he, w)
        row.append(m[-1] * 1000.0)
    label = "attn " if attn else "plain"
    print(label + " " + " ".join(f"{x:6.1f}" for x in row) + f"  {time.time()-t0:.0f}s",
          flush=True)
