import time
import numpy as np
from meshloop import feedback as fb
from meshloop.sampling import _bilinear_many
from meshloop.scenarios import make_scenarios
from meshloop.toybody import toy_body_model

model = toy_body_model(seed=0)
kw = dict(pose_sigma=0.05, orient_sigma=0.1, shape_sigma=0.25)
train = make_scenarios(model, 200, base_seed=0, **kw)
held = make_scenarios(model, 40, base_seed=1000, **kw)

D = fb.param_vector_length(model.n_joints, model.n_shape)
mean = fb.mean_param_vector(model.n_joints, model.n_shape)

def stage(scens, frac, level):
    gt = np.stack([s.gt_vector for s in scens])
    v1 = mean + frac * (gt - mean)
    maps = np.stack([np.asarray(s.pyramid[level].data) for s in scens])
    mesh_pts = fb._pose_batch(model, v1)[3]
    feats = _bilinear_many(maps, mesh_pts)      # (B, 431, C)
    X = feats.reshape(len(scens), -1)
    Y = gt - v1
    return X, Y, v1, gt

def pve_of(vec, gt):
    pv = fb._pose_batch(model, vec)[0]
    gv = fb._pose_batch(model, gt)[0]
    return np.linalg.norm(pv - gv, axis=-1).mean() * 1000

for level in (2, 1):
    for frac in (0.35, 0.65):
        Xtr, Ytr, v1tr, gttr = stage(train, frac, level)
        Xte, Yte, v1te, gtte = stage(held, frac, level)
        mu = Xtr.mean(0)
        Xtr_c, Xte_c = Xtr - mu, Xte - mu
        base = pve_of(v1te, gtte)
        row = [f"L{level} frac={frac} base={base:.1f}mm"]
        for lam in (1e0, 1e1, 1e2, 1e3):
            A = Xtr_c.T @ Xtr_c + lam * np.eye(Xtr.shape[1])
            W = np.linalg.solve(A, Xtr_c.T @ (Ytr - Ytr.mean(0)))
            pred = (Xte_c @ W) + Ytr.mean(0)
            after = pve_of(v1te + pred, gtte)
            tr_after = pve_of(v1tr + (Xtr_c @ W) + Ytr.mean(0), gttr)
            row.append(f"lam{lam:g}: held {after:.1f} train {tr_after:.1f}")
        print("  ".join(row))
