import sys
import time
import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
t0 = time.time()
kw = dict(pose_sigma=0.05, orient_sigma=0.1, shape_sigma=0.25)
train = make_scenarios(model, 200, base_seed=0, **kw)
held = make_scenarios(model, 40, base_seed=1000, **kw)
print(f"setup {time.time()-t0:.1f}s (half sigmas)")

def run(tag, lr, epochs, batch, hidden, grid, wd, fnoise, detach, opt="adam"):
    t1 = time.time()
    cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid)
    w, hist = fb.train_toy(model, train, cfg, epochs=epochs, learning_rate=lr,
                           batch_size=batch, seed=0, optimizer=opt,
                           weight_decay=wd, feature_noise=fnoise, detach=detach)
    m, _ = fb.evaluate_pve(model, held, w)
    tm, _ = fb.evaluate_pve(model, train[:40], w)
    dt = time.time() - t1
    ok = m[0] > m[1] > m[2] >= m[3] and m[3] < 0.5 * m[1]
    print(f"{tag}: held " + " ".join(f"{x*1000:.1f}" for x in m) +
          f"  ratio {m[3]/m[1]:.3f} ok={ok}  train " +
          " ".join(f"{x*1000:.1f}" for x in tm) + f"  {dt:.0f}s")

which = sys.argv[1:] or ["G", "H", "I"]
if "G" in which: run("G bptt h96 wd0      ", 1.5e-3, 40, 20, 96, 11, 0.0, 0.0, False)
if "H" in which: run("H detach h96 wd0    ", 1.5e-3, 40, 20, 96, 11, 0.0, 0.0, True)
if "I" in which: run("I detach h96 wd1e-3 fn.01", 1.5e-3, 40, 20, 96, 11, 1e-3, 0.01, True)
if "J" in which: run("J detach h192 wd1e-3 fn.01 e60", 1e-3, 60, 20, 192, 11, 1e-3, 0.01, True)
