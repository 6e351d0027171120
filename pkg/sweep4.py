import sys
import time

import numpy as np

from meshloop import feedback as fb
from meshloop import toybody
from meshloop import scenarios as sc

model = toybody.toy_body_model(seed=0)


def build(noise, n_train=200, n_held=40):
    t0 = time.time()
    tr = sc.make_scenarios(model, n_train, base_seed=0, noise=noise)
    he = sc.make_scenarios(model, n_held, base_seed=10_000, noise=noise)
    print(f"scenarios {time.time() - t0:.0f}s", flush=True)
    return tr, he


def run(tag, tr, he, lr, epochs, batch, hidden, grid, wd, fnoise, seed=0):
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


which = sys.argv[1] if len(sys.argv) > 1 else "A"

if which == "A":
    tr, he = build((0.08, 0.008, 0.002))
    run("A1", tr, he, lr=1.5e-3, epochs=50, batch=20, hidden=96, grid=11, wd=5e-4, fnoise=0.008)
elif which == "B":
    tr, he = build((0.12, 0.008, 0.002))
    run("B1", tr, he, lr=1.5e-3, epochs=50, batch=20, hidden=96, grid=11, wd=5e-4, fnoise=0.008)
elif which == "C":
    tr, he = build((0.08, 0.008, 0.002))
    run("C1", tr, he, lr=1.5e-3, epochs=80, batch=20, hidden=96, grid=11, wd=1e-3, fnoise=0.01)
