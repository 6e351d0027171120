"""Text asset files: models, loop weights, parameters, estimates, reports.

Every document is JSON carrying a `format` tag, a schema `version`, and
explicit shapes next to row-major value lists, so any JSON parser can
rebuild the arrays without guessing. Floats survive a round trip
bit-exactly: the encoder emits the shortest decimal repr and the decoder
returns the nearest double, which is the original value.

Reports are flat `key = value` lines instead of JSON; they exist to be
grepped and diffed.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .camera import WeakPerspectiveCamera
from .feedback import FeedbackConfig, FeedbackWeights, LossWeights
from .integration import FaceEstimate, FullBodyParams, HandEstimate, PartEstimates
from .kinematics import ArticulatedModel, KinematicTree, ModelParams

MODEL_FORMAT = "meshloop-model"
WEIGHTS_FORMAT = "meshloop-weights"
PARAMS_FORMAT = "meshloop-params"
ESTIMATES_FORMAT = "meshloop-estimates"
MESH_FORMAT = "meshloop-mesh"
SCHEMA_VERSION = 1


def encode_array(arr: np.ndarray) -> dict:
    """Array as {shape, data} with data flattened row-major."""
    arr = np.asarray(arr)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def decode_array(doc: dict, dtype=float) -> np.ndarray:
    arr = np.asarray(doc["data"], dtype=dtype)
    expected = int(np.prod(doc["shape"])) if doc["shape"] else 1
    if arr.size != expected:
        raise ValueError(f"array data length {arr.size} != shape {doc['shape']}")
    return arr.reshape(doc["shape"])


def encode_sparse(mat) -> dict:
    """Sparse matrix as parallel (row, col, value) lists, row-major order."""
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return {
        "shape": [int(mat.shape[0]), int(mat.shape[1])],
        "rows": coo.row[order].tolist(),
        "cols": coo.col[order].tolist(),
        "values": coo.data[order].tolist(),
    }


def decode_sparse(doc: dict):
    import scipy.sparse as sp

    rows = np.asarray(doc["rows"], dtype=int)
    cols = np.asarray(doc["cols"], dtype=int)
    values = np.asarray(doc["values"], dtype=float)
    if not rows.shape == cols.shape == values.shape:
        raise ValueError("sparse triplet lists disagree in length")
    return sp.coo_matrix((values, (rows, cols)), shape=tuple(doc["shape"])).tocsr()


def encode_camera(cam: WeakPerspectiveCamera) -> dict:
    return {
        "scale": float(cam.scale),
        "translation": np.asarray(cam.translation, dtype=float).tolist(),
        "focal": float(cam.focal),
        "image_size": int(cam.image_size),
    }


def decode_camera(doc: dict) -> WeakPerspectiveCamera:
    return WeakPerspectiveCamera(
        scale=doc["scale"],
        translation=np.asarray(doc["translation"], dtype=float),
        focal=doc["focal"],
        image_size=doc["image_size"],
    )


def _dump(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, allow_nan=False)
        f.write("\n")


def _load(path, expected_format: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    got = doc.get("format")
    if got != expected_format:
        raise ValueError(f"{path}: format {got!r}, expected {expected_format!r}")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported version {version!r}")
    return doc


_MODEL_ARRAYS = (
    "template_vertices",
    "faces",
    "joint_regressor",
    "skin_weights",
    "shape_blendshapes",
    "expression_blendshapes",
    "part_index",
    "uv",
    "pncc",
)
_INT_ARRAYS = {"faces", "part_index"}


def save_model(model: ArticulatedModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": SCHEMA_VERSION,
        "kind": model.kind,
        "counts": {
            "vertices": model.n_vertices,
            "joints": model.n_joints,
            "faces": int(model.faces.shape[0]),
            "shape": model.n_shape,
            "expression": model.n_expression,
            "reduced": model.n_reduced,
            "parts": model.n_parts,
        },
        "parents": model.tree.parents.tolist(),
        "joint_names": list(model.tree.names),
        "arrays": {name: encode_array(getattr(model, name)) for name in _MODEL_ARRAYS},
        "downsample": encode_sparse(model.downsample_matrix),
    }
    _dump(doc, path)


def load_model(path) -> ArticulatedModel:
    doc = _load(path, MODEL_FORMAT)
    tree = KinematicTree(parents=np.asarray(doc["parents"], dtype=int),
                         names=list(doc["joint_names"]))
    arrays = {}
    for name in _MODEL_ARRAYS:
        dtype = int if name in _INT_ARRAYS else float
        arrays[name] = decode_array(doc["arrays"][name], dtype=dtype)
    model = ArticulatedModel(tree=tree, downsample_matrix=decode_sparse(doc["downsample"]),
                             kind=doc["kind"], **arrays)
    counts = doc["counts"]
    actual = {
        "vertices": model.n_vertices,
        "joints": model.n_joints,
        "faces": int(model.faces.shape[0]),
        "shape": model.n_shape,
        "expression": model.n_expression,
        "reduced": model.n_reduced,
        "parts": model.n_parts,
    }
    if counts != actual:
        raise ValueError(f"{path}: declared counts {counts} != actual {actual}")
    return model


def save_weights(weights: FeedbackWeights, path) -> None:
    cfg = weights.config
    lw = cfg.loss_weights
    doc = {
        "format": WEIGHTS_FORMAT,
        "version": SCHEMA_VERSION,
        "n_channels": weights.n_channels,
        "param_dim": weights.param_dim,
        "n_mesh_points": weights.n_mesh_points,
        "config": {
            "iterations": cfg.iterations,
            "grid_size": cfg.grid_size,
            "reduce_dim": cfg.reduce_dim,
            "attention_dim": cfg.attention_dim,
            "hidden_dim": cfg.hidden_dim,
            "use_attention": cfg.use_attention,
            "learning_rate": cfg.learning_rate,
            "momentum": cfg.momentum,
            "loss_weights": {
                "lambda_2d": lw.lambda_2d,
                "lambda_3d": lw.lambda_3d,
                "lambda_para": lw.lambda_para,
            },
        },
        "layers": [
            {"name": name, "shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in weights.named_parameters()
        ],
    }
    _dump(doc, path)


def load_weights(path, model: ArticulatedModel) -> FeedbackWeights:
    doc = _load(path, WEIGHTS_FORMAT)
    c = dict(doc["config"])
    c["loss_weights"] = LossWeights(**c["loss_weights"])
    cfg = FeedbackConfig(**c)
    weights = FeedbackWeights(model, doc["n_channels"], cfg, seed=0)
    if weights.n_mesh_points != doc["n_mesh_points"]:
        raise ValueError(f"{path}: saved for {doc['n_mesh_points']} mesh points, "
                         f"model has {weights.n_mesh_points}")
    if weights.param_dim != doc["param_dim"]:
        raise ValueError(f"{path}: saved for parameter length {doc['param_dim']}, "
                         f"model needs {weights.param_dim}")
    values = {layer["name"]: decode_array(layer) for layer in doc["layers"]}
    weights.load_arrays(values)
    return weights


def save_params(params, path) -> None:
    """Write ModelParams or FullBodyParams; the layout field tells them apart."""
    fullbody = isinstance(params, FullBodyParams)
    doc = {
        "format": PARAMS_FORMAT,
        "version": SCHEMA_VERSION,
        "layout": "fullbody" if fullbody else "single",
        "theta": encode_array(params.theta),
        "beta": encode_array(params.beta),
        "camera": encode_camera(params.camera),
    }
    if fullbody or params.psi is not None:
        doc["psi"] = encode_array(params.psi)
    _dump(doc, path)


def load_params(path):
    doc = _load(path, PARAMS_FORMAT)
    theta = decode_array(doc["theta"])
    beta = decode_array(doc["beta"])
    camera = decode_camera(doc["camera"])
    psi = decode_array(doc["psi"]) if "psi" in doc else None
    if doc["layout"] == "fullbody":
        return FullBodyParams(theta=theta, beta=beta, psi=psi, camera=camera)
    return ModelParams(theta=theta, beta=beta, camera=camera, psi=psi)


def _encode_hand(hand: HandEstimate) -> dict:
    return {
        "global_orient": encode_array(hand.global_orient),
        "finger_theta": encode_array(hand.finger_theta),
        "confidence": float(hand.confidence),
    }


def _decode_hand(doc: dict) -> HandEstimate:
    return HandEstimate(global_orient=decode_array(doc["global_orient"]),
                        finger_theta=decode_array(doc["finger_theta"]),
                        confidence=doc["confidence"])


def save_estimates(estimates: PartEstimates, path) -> None:
    doc = {
        "format": ESTIMATES_FORMAT,
        "version": SCHEMA_VERSION,
        "body_theta": encode_array(estimates.body_theta),
        "body_beta": encode_array(estimates.body_beta),
        "camera": encode_camera(estimates.camera),
    }
    if estimates.left_hand is not None:
        doc["left_hand"] = _encode_hand(estimates.left_hand)
    if estimates.right_hand is not None:
        doc["right_hand"] = _encode_hand(estimates.right_hand)
    if estimates.face is not None:
        doc["face"] = {
            "jaw_theta": encode_array(estimates.face.jaw_theta),
            "psi": encode_array(estimates.face.psi),
            "confidence": float(estimates.face.confidence),
        }
    _dump(doc, path)


def load_estimates(path) -> PartEstimates:
    doc = _load(path, ESTIMATES_FORMAT)
    face = None
    if "face" in doc:
        fd = doc["face"]
        face = FaceEstimate(jaw_theta=decode_array(fd["jaw_theta"]),
                            psi=decode_array(fd["psi"]),
                            confidence=fd["confidence"])
    return PartEstimates(
        body_theta=decode_array(doc["body_theta"]),
        body_beta=decode_array(doc["body_beta"]),
        camera=decode_camera(doc["camera"]),
        left_hand=_decode_hand(doc["left_hand"]) if "left_hand" in doc else None,
        right_hand=_decode_hand(doc["right_hand"]) if "right_hand" in doc else None,
        face=face,
    )


def save_mesh(vertices: np.ndarray, path, scenario: int = None, iteration: int = None) -> None:
    """One mesh snapshot; faces live in the model asset, not here."""
    doc = {"format": MESH_FORMAT, "version": SCHEMA_VERSION}
    if scenario is not None:
        doc["scenario"] = int(scenario)
    if iteration is not None:
        doc["iteration"] = int(iteration)
    doc["vertices"] = encode_array(vertices)
    _dump(doc, path)


def load_mesh(path) -> np.ndarray:
    return decode_array(_load(path, MESH_FORMAT)["vertices"])


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(doc: dict, path) -> None:
    """Flat `key = value` lines, one per entry, insertion order kept."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in doc.items():
            f.write(f"{key} = {format_value(value)}\n")


def parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    return text


def read_report(path) -> dict:
    doc = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ValueError(f"{path}: malformed report line {line!r}")
            doc[key] = parse_value(value)
    return doc


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
