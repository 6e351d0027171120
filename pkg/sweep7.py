import sys
import time

import numpy as np

from meshloop import feedback as fb
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
small = toy_body_model(seed=0, downsample_count=160)


def truncate(scn, c=7):
    from meshloop.sampling import FeaturePyramid
    from meshloop.scenarios import Scenario
    pyr = FeaturePyramid([lv.data[:c] for lv in scn.pyramid.levels])
    return Scenario(seed=scn.seed, gt_params=scn.gt_params, gt_vector=scn.gt_vector,
                    pyramid=pyr, camera=scn.camera)


def pair(rep, noise, n_train=60, n_held=40, epochs=30, lr=2e-3, hidden=48,
         grid=5, pose=0.03, orient=0.2, shape=0.25, batch=None, mdl=None,
         raw=False, wseed=None, fnoise=0.0):
    mdl = model if mdl is None else mdl
    kw = dict(noise=noise, pose_sigma=pose, orient_sigma=orient, shape_sigma=shape,
              camera_scale=0.8, camera_sigma=0.5)
    tr = make_scenarios(mdl, n_train, base_seed=20_000 + 1000 * rep, **kw)
    he = make_scenarios(mdl, n_held, base_seed=60_000 + 1000 * rep, **kw)
    if raw:
        tr = [truncate(s) for s in tr]
        he = [truncate(s) for s in he]
    out = {}
    for attn in (True, False):
        cfg = fb.FeedbackConfig(hidden_dim=hidden, grid_size=grid, use_attention=attn)
        w, _ = fb.train_toy(mdl, tr, config=cfg, epochs=epochs, learning_rate=lr,
                            batch_size=batch, seed=rep if wseed is None else wseed,
                            optimizer="adam", feature_noise=fnoise)
        m, _ = fb.evaluate_pve(mdl, he, w)
        out[attn] = m[-1] * 1000.0
    return out[True], out[False]


which = sys.argv[1] if len(sys.argv) > 1 else "a"
noises = {
    "a": 0.06,
    "b": (0.02, 0.08, 0.08),
    "c": 0.1,
}
t0 = time.time()
wins = 0
for rep in range(10):
    if which == "d":
        a, p = pair(rep, 0.01, mdl=small, raw=True, orient=0.3, epochs=60, batch=20)
    elif which == "e":
        a, p = pair(rep, 0.01, mdl=small, raw=True, orient=0.3, epochs=100, batch=20)
    elif which == "f":
        a, p = pair(rep, 0.1, mdl=small, orient=0.3, pose=0.02, shape=0.2,
                    n_train=40, epochs=400, batch=None)
    elif which == "g":
        a, p = pair(rep, 0.03, mdl=small, orient=0.1, epochs=50, batch=20, grid=3)
    elif which == "h":
        a, p = pair(rep, 0.03, mdl=small, orient=0.1, epochs=50, batch=20, grid=5)
    elif which == "j":
        a, p = pair(rep, 0.03, mdl=small, orient=0.1, epochs=75, batch=20, grid=5,
                    lr=1e-3)
    elif which == "k":
        a, p = pair(rep, 0.03, mdl=small, orient=0.1, epochs=75, batch=20, grid=5,
                    lr=1e-3, wseed=0, fnoise=0.02)
    elif which == "l":
        a, p = pair(rep, 0.03, mdl=small, orient=0.1, epochs=75, batch=20, grid=5,
                    lr=1e-3, raw=True)
    else:
        a, p = pair(rep, noises[which])
    win = a <= p
    wins += win
    print(f"rep {rep}: attn {a:.1f} plain {p:.1f} win={win}", flush=True)
print(f"{which}: wins {wins}/10  {time.time() - t0:.0f}s")
