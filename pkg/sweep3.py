import sys
import time
import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)

def build(pose_s, orient_s, shape_s, noise):
    t0 = time.time()
    kw = dict(pose_sigma=pose_s, orient_sigma=orient_s, shape_sigma=shape_s, noise=noise)
    tr = make_scenarios(model, 200, base_seed=0, **kw)
    he = make_scenarios(model, 40, base_seed=1000, **kw)
    print(f"  scenarios {time.time()-t0:.0f}s  sig=({pose_s},{orient_s},{shape_s}) noise={noise}")
    return tr, he

def run(tag, tr, he, lr, epochs, batch, hidden, grid, wd, fnoise, detach=False):
    t1 = time.time()
    cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid)
    w, hist = fb.train_toy(model, tr, cfg, epochs=epochs, learning_rate=lr,
                           batch_size=batch, seed=0, optimizer="adam",
                           weight_decay=wd, feature_noise=fnoise, detach=detach)
    m, _ = fb.evaluate_pve(model, he, w)
    tm, _ = fb.evaluate_pve(model, tr[:40], w)
    ok = m[0] > m[1] > m[2] >= m[3] and m[3] < 0.5 * m[1]
    print(f"{tag}: held " + " ".join(f"{x*1000:.1f}" for x in m) +
          f"  ratio {m[3]/m[1]:.3f} ok={ok}  train " +
          " ".join(f"{x*1000:.1f}" for x in tm) + f"  {time.time()-t1:.0f}s")
    return m

which = sys.argv[1] if len(sys.argv) > 1 else "K"
if which == "K":
    tr, he = build(0.05, 0.4, 0.3, (0.08, 0.01, 0.002))
    run("K1 h96 wd1e-3 fn.01", tr, he, 1.5e-3, 50, 20, 96, 11, 1e-3, 0.01)
if which == "L":
    tr, he = build(0.05, 0.4, 0.3, (0.12, 0.008, 0.002))
    run("L1 h96 wd1e-3 fn.01", tr, he, 1.5e-3, 50, 20, 96, 11, 1e-3, 0.01)
if which == "M":
    tr, he = build(0.04, 0.5, 0.3, (0.15, 0.008, 0.002))
    run("M1 h96 wd1e-3 fn.01", tr, he, 1.5e-3, 50, 20, 96, 11, 1e-3, 0.01)
    run("M2 h128 wd3e-4 fn.005 e70", tr, he, 1.2e-3, 70, 20, 128, 11, 3e-4, 0.005)
