"""Batch front-end for the library.

Subcommands: genmodel, refine, integrate, render, eval. Every command is
deterministic given its flags; re-running writes byte-identical outputs.
Failures print a single `error: ...` line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import assets
from .feedback import (DEFAULT_HIDDEN_DIM, DEFAULT_ITERATIONS, FeedbackConfig,
                       FeedbackWeights, LossWeights, evaluate_pve, run_loop, train_toy)
from .integration import (DEFAULT_VISIBILITY_THRESHOLD, STRATEGIES, adaptive_integrate)
from .kinematics import forward_kinematics, pose_mesh, shape_blend
from .metrics import mpjpe, pa_mpjpe, pa_pve, pve
from .raster import DEFAULT_RESOLUTION, RasterConfig, export_map_pngs, rasterize
from .rotations import DEFAULT_TWIST_LIMIT_DEG, TwistRange
from .sampling import DEFAULT_GRID_SIZE, DEFAULT_REDUCE_DIM
from .scenarios import make_scenarios
from .toybody import generate_model

MODEL_KINDS = ("body", "hand", "fullbody")
JOINT_DECIMALS = 9


class CliError(Exception):
    """User-facing failure; main() prints it as a one-line error."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


@dataclass
class RunConfig:
    """Shared knobs with the published defaults baked in."""

    iterations: int = DEFAULT_ITERATIONS
    twist_min_deg: float = -DEFAULT_TWIST_LIMIT_DEG
    twist_max_deg: float = DEFAULT_TWIST_LIMIT_DEG
    grid_size: int = DEFAULT_GRID_SIZE
    reduce_dim: int = DEFAULT_REDUCE_DIM
    visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD
    loss_weights: LossWeights = field(default_factory=LossWeights)
    out: str = "out"

    def twist_range(self) -> TwistRange:
        return TwistRange.from_degrees(self.twist_min_deg, self.twist_max_deg)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _peek_format(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f).get("format")


def cmd_genmodel(args) -> int:
    model = generate_model(args.kind, seed=args.seed)
    _ensure_parent(args.out)
    assets.save_model(model, args.out)
    print(f"wrote {args.out} (kind={model.kind} joints={model.n_joints} "
          f"vertices={model.n_vertices})")
    return 0


_LOOP_FLAGS = (
    ("iterations", "iterations"),
    ("grid", "grid_size"),
    ("reduce_dim", "reduce_dim"),
    ("hidden_dim", "hidden_dim"),
    ("attention", "use_attention"),
)


def _resolve_weights(args, model, n_channels):
    """Fresh seeded weights from the flags, or a checkpoint (whose stored
    settings must not contradict explicitly given flags)."""
    if args.weights is not None:
        weights = assets.load_weights(args.weights, model)
        cfg = weights.config
        for flag, attr in _LOOP_FLAGS:
            given = getattr(args, flag)
            if given is not None and given != getattr(cfg, attr):
                raise CliError(f"--{flag.replace('_', '-')} {given} conflicts with "
                               f"{args.weights} ({attr}={getattr(cfg, attr)})")
        if weights.n_channels != n_channels:
            raise CliError(f"{args.weights} expects {weights.n_channels} feature "
                           f"channels, scenarios carry {n_channels}")
        return weights
    base = RunConfig()
    cfg = FeedbackConfig(
        iterations=args.iterations if args.iterations is not None else base.iterations,
        grid_size=args.grid if args.grid is not None else base.grid_size,
        reduce_dim=args.reduce_dim if args.reduce_dim is not None else base.reduce_dim,
        hidden_dim=args.hidden_dim if args.hidden_dim is not None else DEFAULT_HIDDEN_DIM,
        use_attention=args.attention if args.attention is not None else True,
    )
    return FeedbackWeights(model, n_channels, cfg, seed=args.seed)


def cmd_refine(args) -> int:
    if args.scenarios < 1:
        raise CliError("--scenarios must be at least 1")
    model = assets.load_model(args.model)
    scenarios = make_scenarios(model, args.scenarios, base_seed=args.seed)
    weights = _resolve_weights(args, model, scenarios[0].pyramid[0].channels)

    if args.train:
        weights, history = train_toy(
            model, scenarios, epochs=args.epochs, learning_rate=args.learning_rate,
            batch_size=args.batch_size, seed=args.seed, weights=weights,
            optimizer=args.optimizer, feature_noise=args.feature_noise)
        print(f"trained {args.epochs} epochs, loss {history[0]:.6g} -> {history[-1]:.6g}")

    os.makedirs(args.out, exist_ok=True)
    if args.save_weights is not None:
        _ensure_parent(args.save_weights)
        assets.save_weights(weights, args.save_weights)
        print(f"wrote {args.save_weights}")

    means, per_scenario = evaluate_pve(model, scenarios, weights)
    iters = weights.config.iterations
    header = ["id"] + [f"M_{t}" for t in range(iters + 1)]
    rows = [[i] + [round(float(v) * 1000.0, 6) for v in per_scenario[i]]
            for i in range(len(scenarios))]
    csv_path = os.path.join(args.out, "metrics.csv")
    assets.write_csv(csv_path, header, rows)

    mesh_dir = os.path.join(args.out, "meshes")
    os.makedirs(mesh_dir, exist_ok=True)
    for i, scenario in enumerate(scenarios):
        for state in run_loop(model, scenario.pyramid, weights):
            assets.save_mesh(state.vertices,
                             os.path.join(mesh_dir, f"scenario_{i:04d}_iter{state.t}.json"),
                             scenario=i, iteration=state.t)

    summary = " ".join(f"M_{t}={means[t] * 1000.0:.2f}" for t in range(iters + 1))
    print(f"mean PVE (mm): {summary}")
    print(f"wrote {csv_path} and {len(scenarios) * (iters + 1)} mesh files under {mesh_dir}")
    return 0


def cmd_integrate(args) -> int:
    model = assets.load_model(args.model)
    estimates = assets.load_estimates(args.estimates)
    twist_range = TwistRange.from_degrees(args.twist_min_deg, args.twist_max_deg)
    params, report = adaptive_integrate(estimates, model, twist_range=twist_range,
                                        visibility_threshold=args.vis_threshold,
                                        strategy=args.strategy)
    os.makedirs(args.out, exist_ok=True)
    params_path = os.path.join(args.out, "params.json")
    assets.save_params(params, params_path)
    report_path = os.path.join(args.out, "report.txt")
    assets.write_report(report.to_flat_dict(), report_path)

    # Positions are strategy-invariant up to float noise; rounding makes
    # the files byte-comparable across strategies.
    _, rest_joints = shape_blend(model, params.beta, params.psi if params.psi.size else None)
    posed = forward_kinematics(model.tree, params.theta, rest_joints)
    joints_path = os.path.join(args.out, "joints.csv")
    rows = [[j, model.tree.names[j]] + [round(float(x), JOINT_DECIMALS) for x in pos]
            for j, pos in enumerate(posed.joint_positions)]
    assets.write_csv(joints_path, ["joint", "name", "x", "y", "z"], rows)

    print(f"strategy={args.strategy} " +
          " ".join(f"{h.side}:{h.mode}" for h in report.hands) +
          f" face_used={str(report.face_used).lower()}")
    print(f"wrote {params_path}, {report_path}, {joints_path}")
    return 0


def cmd_render(args) -> int:
    model = assets.load_model(args.model)
    params = assets.load_params(args.params)
    posed = pose_mesh(model, params)
    rendered = rasterize(posed.vertices, model.faces, model.part_index, model.uv,
                         params.camera, RasterConfig(resolution=args.resolution),
                         pncc=model.pncc)
    _ensure_parent(args.out)
    paths = export_map_pngs(rendered, args.out)
    coverage = float(rendered.foreground.mean())
    print(f"rendered {args.resolution}x{args.resolution}, foreground {coverage:.1%}")
    print("wrote " + ", ".join(paths))
    return 0


def _vertices_from(path: str, model) -> np.ndarray:
    fmt = _peek_format(path)
    if fmt == assets.PARAMS_FORMAT:
        return pose_mesh(model, assets.load_params(path)).vertices
    if fmt == assets.MESH_FORMAT:
        vertices = assets.load_mesh(path)
        if vertices.shape != (model.n_vertices, 3):
            raise CliError(f"{path}: mesh has shape {vertices.shape}, "
                           f"model needs ({model.n_vertices}, 3)")
        return vertices
    raise CliError(f"{path}: cannot evaluate a {fmt!r} document")


def cmd_eval(args) -> int:
    if len(args.pred) != len(args.gt):
        raise CliError(f"{len(args.pred)} predictions vs {len(args.gt)} ground truths")
    if not args.pred:
        raise CliError("need at least one --pred/--gt pair")
    model = assets.load_model(args.model)
    rows = []
    for i, (pred_path, gt_path) in enumerate(zip(args.pred, args.gt)):
        pred = _vertices_from(pred_path, model)
        gt = _vertices_from(gt_path, model)
        pred_joints = model.joint_regressor @ pred
        gt_joints = model.joint_regressor @ gt
        rows.append([i,
                     round(mpjpe(pred_joints, gt_joints) * 1000.0, 6),
                     round(pa_mpjpe(pred_joints, gt_joints) * 1000.0, 6),
                     round(pve(pred, gt) * 1000.0, 6),
                     round(pa_pve(pred, gt) * 1000.0, 6)])
    _ensure_parent(args.out)
    assets.write_csv(args.out, ["id", "mpjpe", "pa_mpjpe", "pve", "pa_pve"], rows)
    print(f"wrote {args.out} ({len(rows)} rows, millimetres)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="meshloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("genmodel", help="write a procedural articulated model asset")
    p.add_argument("--kind", choices=MODEL_KINDS, default="body")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_genmodel)

    p = sub.add_parser("refine", help="run the feedback loop over synthetic scenarios")
    p.add_argument("--model", required=True, help="model asset file")
    p.add_argument("--scenarios", type=int, default=8, help="number of scenarios")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed for scenarios, weights and training")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, help="sampling grid side length")
    p.add_argument("--reduce-dim", type=int, default=None)
    p.add_argument("--hidden-dim", type=int, default=None)
    p.add_argument("--attention", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--weights", default=None, help="load a weight checkpoint")
    p.add_argument("--train", action="store_true", help="fit the weights first")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--optimizer", choices=("momentum", "adam"), default="momentum")
    p.add_argument("--feature-noise", type=float, default=0.0)
    p.add_argument("--save-weights", default=None, help="write the weights used")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("integrate", help="merge part estimates into full-body parameters")
    p.add_argument("--model", required=True, help="full-body model asset file")
    p.add_argument("--estimates", required=True, help="part estimates file")
    p.add_argument("--strategy", choices=STRATEGIES, default="adaptive")
    p.add_argument("--twist-min-deg", type=float, default=-DEFAULT_TWIST_LIMIT_DEG)
    p.add_argument("--twist-max-deg", type=float, default=DEFAULT_TWIST_LIMIT_DEG)
    p.add_argument("--vis-threshold", type=float, default=DEFAULT_VISIBILITY_THRESHOLD)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("render", help="render part/uv (and pncc) correspondence maps")
    p.add_argument("--model", required=True, help="model asset file")
    p.add_argument("--params", required=True, help="parameters file")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--out", required=True, help="output PNG path prefix")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="compare meshes or parameters against ground truth")
    p.add_argument("--model", required=True, help="model asset file")
    p.add_argument("--pred", action="append", default=[],
                   help="prediction file (repeatable; params or mesh)")
    p.add_argument("--gt", action="append", default=[],
                   help="ground-truth file (repeatable, paired with --pred by order)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise CliError("a subcommand is required (genmodel, refine, integrate, render, eval)")
        return args.func(args)
    except (CliError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
