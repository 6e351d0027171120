import sys
import time

import numpy as np

from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)


def build(noise, pose=0.05, orient=0.1, shape=0.25, cam=0.9, csig=0.08,
          n_train=200, n_held=40):
    t0 = time.time()
    kw = dict(noise=noise, pose_sigma=pose, orient_sigma=orient, shape_sigma=shape,
              camera_scale=cam, camera_sigma=csig)
    tr = make_scenarios(model, n_train, base_seed=0, **kw)
    he = make_scenarios(model, n_held, base_seed=10_000, **kw)
    print(f"scenarios {time.time() - t0:.0f}s", flush=True)
    return tr, he


def run(tag, tr, he, lr=1.5e-3, epochs=40, batch=20, hidden=96, grid=11,
        wd=0.0, fnoise=0.0, attn=True, seed=0, detach=False, rdim=5):
    cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid, use_attention=attn,
                            reduce_dim=rdim)
    t0 = time.time()
    w, hist = fb.train_toy(model, tr, config=cfg, epochs=epochs, learning_rate=lr,
                           batch_size=batch, seed=seed, optimizer="adam",
                           weight_decay=wd, feature_noise=fnoise, detach=detach)
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
    return m


which = sys.argv[1] if len(sys.argv) > 1 else "noattn"

if which == "noattn":
    tr, he = build((0.05, 0.01, 0.002))
    run("noattn", tr, he, attn=False)
elif which == "attn":
    tr, he = build((0.05, 0.01, 0.002))
    run("attn", tr, he, attn=True)
elif which == "clean":
    tr, he = build((0.01, 0.01, 0.01))
    run("c1", tr, he, attn=False)
    run("c2 wd1e-3 fn.02 e150", tr, he, attn=False, wd=1e-3, fnoise=0.02, epochs=150)
elif which == "reg":
    tr, he = build((0.01, 0.01, 0.01))
    run("r1 fn.05 e150", tr, he, attn=False, fnoise=0.05, epochs=150)
    run("r2 wd3e-3 fn.02 e300", tr, he, attn=False, wd=3e-3, fnoise=0.02, epochs=300)
elif which == "rd":
    tr, he = build((0.01, 0.01, 0.01))
    run("e1 rd15 fn.05 e200", tr, he, attn=False, fnoise=0.05, epochs=200, rdim=15)
elif which == "rdp":
    tr, he = build((0.01, 0.01, 0.01), pose=0.03)
    run("e2 rd15 p.03 fn.05 e200", tr, he, attn=False, fnoise=0.05, epochs=200, rdim=15)
elif which == "t1":
    tr, he = build((0.01, 0.01, 0.01), pose=0.03, orient=0.2)
    run("t1 o.2 p.03 fn.05 e150", tr, he, attn=False, fnoise=0.05, epochs=150)
elif which == "t2":
    tr, he = build((0.01, 0.01, 0.01), pose=0.03, orient=0.2)
    run("t2 grid5", tr, he, attn=False, fnoise=0.05, epochs=150, grid=5)
    run("t3 grid3", tr, he, attn=False, fnoise=0.05, epochs=150, grid=3)
