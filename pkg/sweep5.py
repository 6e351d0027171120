import sys
import time

import numpy as np

from meshloop import feedback as fb
from meshloop import toybody
from meshloop import scenarios as sc

model = toybody.toy_body_model(seed=0)


def build(noise, pose=0.03, orient=0.1, shape=0.25, cam=1.05, csig=0.05,
          n_train=200, n_held=40):
    t0 = time.time()
    kw = dict(noise=noise, pose_sigma=pose, orient_sigma=orient, shape_sigma=shape,
              camera_scale=cam, camera_sigma=csig)
    tr = sc.make_scenarios(model, n_train, base_seed=0, **kw)
    he = sc.make_scenarios(model, n_held, base_seed=10_000, **kw)
    print(f"scenarios {time.time() - t0:.0f}s", flush=True)
    return tr, he


def run(tag, tr, he, lr=1.5e-3, epochs=50, batch=20, hidden=96, grid=11,
        wd=0.0, fnoise=0.0, seed=0):
    cfg = fb.FeedbackConfig(
        iterations=3,
        grid_size=grid,
        reduce_dim=5,
        attention_dim=5,
        hidden_dim=hidden,
        use_attention=True,
        learning_rate=lr,
    )
    t0 = time.time()
    w, hist = fb.train_toy(
        model,
        tr,
        config=cfg,
        epochs=epochs,
        batch_size=batch,
        seed=seed,
        optimizer="adam",
        weight_decay=wd,
        feature_noise=fnoise,
    )
    m, _ = fb.evaluate_pve(model, he, w)
    mt, _ = fb.evaluate_pve(model, tr[:40], w)
    m = m * 1000.0
    mt = mt * 1000.0
    ok = m[0] > m[1] > m[2] >= m[3] and m[3] < 0.5 * m[1]
    print(
        f"{tag}: held {m[0]:.1f} {m[1]:.1f} {m[2]:.1f} {m[3]:.1f} "
        f"ratio {m[3] / m[1]:.3f} ok={ok} "
        f"train {mt[0]:.1f} {mt[1]:.1f} {mt[2]:.1f} {mt[3]:.1f} "
        f"{time.time() - t0:.0f}s",
        flush=True,
    )
    return ok


which = sys.argv[1] if len(sys.argv) > 1 else "i"

if which == "i":
    tr, he = build((0.08, 0.008, 0.002), cam=0.9, csig=0.08)
    run("cam09", tr, he, wd=5e-4, fnoise=0.008)
elif which == "ii":
    tr, he = build((0.05, 0.008, 0.002))
    run("lown0", tr, he, wd=5e-4, fnoise=0.008)
elif which == "iii":
    tr, he = build((0.08, 0.008, 0.002))
    run("noreg", tr, he, wd=0.0, fnoise=0.0)
elif which == "g":
    tr, he = build((0.05, 0.01, 0.002), pose=0.05, cam=0.9, csig=0.08)
    run("gre", tr, he, epochs=40)
