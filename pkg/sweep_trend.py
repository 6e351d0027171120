import time
import numpy as np
from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
t0 = time.time()
train = make_scenarios(model, 200, base_seed=0)
held = make_scenarios(model, 40, base_seed=1000)
print(f"setup {time.time()-t0:.1f}s")

def run(tag, lr, epochs, batch, hidden, grid, wd, fnoise, opt="adam"):
    t1 = time.time()
    cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid)
    w, hist = fb.train_toy(model, train, cfg, epochs=epochs, learning_rate=lr,
                           batch_size=batch, seed=0, optimizer=opt,
                           weight_decay=wd, feature_noise=fnoise)
    m, _ = fb.evaluate_pve(model, held, w)
    tm, _ = fb.evaluate_pve(model, train[:40], w)
    dt = time.time() - t1
    ok = m[0] > m[1] > m[2] >= m[3] and m[3] < 0.5 * m[1]
    print(f"{tag}: held " + " ".join(f"{x*1000:.1f}" for x in m) +
          f"  ratio {m[3]/m[1]:.3f} ok={ok}  train " +
          " ".join(f"{x*1000:.1f}" for x in tm) + f"  loss {hist[-1]:.3f}  {dt:.0f}s")
    return m, w

import sys
which = sys.argv[1:] if len(sys.argv) > 1 else ["A", "B", "C"]
if "A" in which: run("A h96 wd0 fn0      ", 1.5e-3, 40, 20, 96, 11, 0.0, 0.0)
if "B" in which: run("B h96 wd3e-3 fn.02 ", 1.5e-3, 40, 20, 96, 11, 3e-3, 0.02)
if "C" in which: run("C h192 wd1e-2 fn.03", 1.5e-3, 40, 20, 192, 11, 1e-2, 0.03)
if "D" in which: run("D h96 wd1e-2 fn.05 ", 2e-3, 40, 20, 96, 11, 1e-2, 0.05)
if "E" in which: run("E h48 wd3e-3 fn.03 ", 2e-3, 40, 20, 48, 11, 3e-3, 0.03)
if "F" in which: run("F h96 wd3e-3 fn.03 e60", 1.5e-3, 60, 20, 96, 11, 3e-3, 0.03)
