"""Rotation representations and the twist machinery built on them.

Conventions
-----------
* Quaternions are wxyz, unit norm, canonical hemisphere w >= 0.
* Angles are radians unless a function name says otherwise.
* Matrices are 3x3 acting on column vectors.
* The continuous 6D representation stores the first two matrix columns,
  concatenated; decoding runs Gram-Schmidt and completes the basis with a
  cross product.
* Every function broadcasts over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-12

REP_QUAT = "quat"
REP_MATRIX = "matrix"
REP_AXIS_ANGLE = "axis_angle"
REP_ROT6D = "rot6d"
REPRESENTATIONS = (REP_QUAT, REP_MATRIX, REP_AXIS_ANGLE, REP_ROT6D)

DEFAULT_TWIST_LIMIT_DEG = 72.0


def _check_last(a: np.ndarray, shape: tuple, name: str) -> None:
    if a.shape[len(a.shape) - len(shape):] != shape:
        raise ValueError(f"{name} must have trailing shape {shape}, got {a.shape}")


def normalize_quat(q: np.ndarray) -> np.ndarray:
    """Scale to unit norm. Raises on a zero quaternion."""
    q = np.asarray(q, dtype=float)
    _check_last(q, (4,), "q")
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < _EPS):
        raise ValueError("cannot normalize a zero-norm quaternion")
    return q / n


def canonicalize_quat(q: np.ndarray) -> np.ndarray:
    """Flip sign so the scalar part is non-negative."""
    q = np.asarray(q, dtype=float)
    _check_last(q, (4,), "q")
    return np.where(q[..., :1] < 0.0, -q, q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b (apply b first, then a)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_last(a, (4,), "a")
    _check_last(b, (4,), "b")
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    _check_last(q, (4,), "q")
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_inverse(q: np.ndarray) -> np.ndarray:
    """Inverse of a unit quaternion (the conjugate)."""
    return quat_conjugate(normalize_quat(q))


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors v (..., 3) by unit quaternions q (..., 4)."""
    q = normalize_quat(q)
    v = np.asarray(v, dtype=float)
    _check_last(v, (3,), "v")
    u = q[..., 1:]
    w = q[..., :1]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = normalize_quat(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=float)
    m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[..., 0, 1] = 2.0 * (x * y - w * z)
    m[..., 0, 2] = 2.0 * (x * z + w * y)
    m[..., 1, 0] = 2.0 * (x * y + w * z)
    m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[..., 1, 2] = 2.0 * (y * z - w * x)
    m[..., 2, 0] = 2.0 * (x * z - w * y)
    m[..., 2, 1] = 2.0 * (y * z + w * x)
    m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to canonical unit quaternion.

    Uses the four-branch pivot method, vectorized: per element the branch
    with the largest pivot (trace or a diagonal entry) is selected, which
    keeps the square roots well conditioned.
    """
    m = np.asarray(m, dtype=float)
    _check_last(m, (3, 3), "m")
    m00, m01, m02 = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    m10, m11, m12 = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    m20, m21, m22 = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]
    tr = m00 + m11 + m22

    def safe_sqrt(x):
        return np.sqrt(np.maximum(x, _EPS))

    s_w = 2.0 * safe_sqrt(tr + 1.0)
    q_w = np.stack([0.25 * s_w, (m21 - m12) / s_w, (m02 - m20) / s_w, (m10 - m01) / s_w], axis=-1)
    s_x = 2.0 * safe_sqrt(1.0 + m00 - m11 - m22)
    q_x = np.stack([(m21 - m12) / s_x, 0.25 * s_x, (m01 + m10) / s_x, (m02 + m20) / s_x], axis=-1)
    s_y = 2.0 * safe_sqrt(1.0 + m11 - m00 - m22)
    q_y = np.stack([(m02 - m20) / s_y, (m01 + m10) / s_y, 0.25 * s_y, (m12 + m21) / s_y], axis=-1)
    s_z = 2.0 * safe_sqrt(1.0 + m22 - m00 - m11)
    q_z = np.stack([(m10 - m01) / s_z, (m02 + m20) / s_z, (m12 + m21) / s_z, 0.25 * s_z], axis=-1)

    pivots = np.stack([tr, m00, m11, m22], axis=-1)
    choice = np.argmax(pivots, axis=-1)[..., None, None]
    stacked = np.stack([q_w, q_x, q_y, q_z], axis=-2)
    q = np.take_along_axis(stacked, choice, axis=-2)[..., 0, :]
    return canonicalize_quat(normalize_quat(q))


def axis_angle_to_quat(aa: np.ndarray) -> np.ndarray:
    """Axis-angle vector (angle = vector norm) to unit quaternion."""
    aa = np.asarray(aa, dtype=float)
    _check_last(aa, (3,), "aa")
    angle = np.linalg.norm(aa, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x)/x expanded near zero to stay smooth
    small = angle < 1e-8
    k = np.where(small, 0.5 - angle * angle / 48.0, np.sin(half) / np.where(small, 1.0, angle))
    return np.concatenate([np.cos(half), k * aa], axis=-1)


def quat_to_axis_angle(q: np.ndarray) -> np.ndarray:
    q = canonicalize_quat(normalize_quat(q))
    w = q[..., :1]
    v = q[..., 1:]
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(n, w)
    small = n < 1e-12
    axis = np.where(small, np.array([1.0, 0.0, 0.0]), v / np.where(small, 1.0, n))
    return axis * angle


def axis_angle_to_matrix(aa: np.ndarray) -> np.ndarray:
    return quat_to_matrix(axis_angle_to_quat(aa))


def matrix_to_axis_angle(m: np.ndarray) -> np.ndarray:
    return quat_to_axis_angle(matrix_to_quat(m))


def rot6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Decode the continuous 6D representation via Gram-Schmidt.

    Raises ValueError when the first column is near zero or the two columns
    are near parallel, where the decoding is undefined.
    """
    r6 = np.asarray(r6, dtype=float)
    _check_last(r6, (6,), "r6")
    a1 = r6[..., :3]
    a2 = r6[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < 1e-8):
        raise ValueError("rot6d decode is degenerate: first column has near-zero norm")
    b1 = a1 / n1
    c = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(c, axis=-1, keepdims=True)
    if np.any(n2 < 1e-8):
        raise ValueError("rot6d decode is degenerate: columns are near parallel")
    b2 = c / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(m: np.ndarray) -> np.ndarray:
    """First two matrix columns, concatenated."""
    m = np.asarray(m, dtype=float)
    _check_last(m, (3, 3), "m")
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


_TO_MATRIX = {
    REP_QUAT: quat_to_matrix,
    REP_MATRIX: lambda m: np.asarray(m, dtype=float),
    REP_AXIS_ANGLE: axis_angle_to_matrix,
    REP_ROT6D: rot6d_to_matrix,
}
_FROM_MATRIX = {
    REP_QUAT: matrix_to_quat,
    REP_MATRIX: lambda m: m,
    REP_AXIS_ANGLE: matrix_to_axis_angle,
    REP_ROT6D: matrix_to_rot6d,
}


def convert(value: np.ndarray, source: str, target: str) -> np.ndarray:
    """Convert a rotation between representations, routed through matrices."""
    if source not in REPRESENTATIONS:
        raise ValueError(f"unknown source representation {source!r}")
    if target not in REPRESENTATIONS:
        raise ValueError(f"unknown target representation {target!r}")
    if source == target:
        return np.asarray(value, dtype=float)
    return _FROM_MATRIX[target](_TO_MATRIX[source](value))


def quat_angle(q: np.ndarray) -> np.ndarray:
    """Rotation angle in [0, pi] of a unit quaternion."""
    q = normalize_quat(q)
    return 2.0 * np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), np.abs(q[..., 0]))


def quat_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geodesic angle between the rotations of two quaternions."""
    return quat_angle(quat_multiply(quat_inverse(a), normalize_quat(b)))


def geodesic_distance(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Geodesic angle in [0, pi] between two rotation matrices.

    Computed through the relative quaternion, which stays accurate near
    zero where the arccos-of-trace form loses half the digits.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    _check_last(r1, (3, 3), "r1")
    _check_last(r2, (3, 3), "r2")
    rel = np.swapaxes(r1, -1, -2) @ r2
    return quat_angle(matrix_to_quat(rel))


def random_quat(rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform random canonical unit quaternions."""
    shape = (4,) if size is None else tuple(np.atleast_1d(size)) + (4,)
    q = rng.standard_normal(shape)
    return canonicalize_quat(normalize_quat(q))


def random_matrix(rng: np.random.Generator, size=None) -> np.ndarray:
    return quat_to_matrix(random_quat(rng, size))


# ---------------------------------------------------------------------------
# Swing-twist decomposition and twist compensation


@dataclass(frozen=True)
class TwistRange:
    """Admissible twist interval [alpha_min, alpha_max], radians."""

    alpha_min: float = -np.deg2rad(DEFAULT_TWIST_LIMIT_DEG)
    alpha_max: float = np.deg2rad(DEFAULT_TWIST_LIMIT_DEG)

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError(f"alpha_min must be below alpha_max, got [{self.alpha_min}, {self.alpha_max}]")
        if self.alpha_min > 0.0 or self.alpha_max < 0.0:
            raise ValueError("twist range must contain zero")

    @classmethod
    def from_degrees(cls, lo: float, hi: float) -> "TwistRange":
        return cls(np.deg2rad(lo), np.deg2rad(hi))


DEFAULT_TWIST_RANGE = TwistRange()


@dataclass
class TwistDecomposition:
    """Result of splitting a rotation into swing and twist about an axis.

    swing o twist recomposes the input; the twist's imaginary part is
    parallel to twist_axis and the swing's is orthogonal to it. Fields
    broadcast over leading batch dimensions; `singular` marks elements
    where the projection collapsed (rotation by pi about an orthogonal
    axis) and the twist was set to identity.
    """

    swing: np.ndarray
    twist: np.ndarray
    twist_axis: np.ndarray
    twist_angle: np.ndarray
    singular: np.ndarray


def swing_twist(q: np.ndarray, axis: np.ndarray) -> TwistDecomposition:
    """Decompose unit quaternions about an axis into swing and twist.

    Args:
        q: (..., 4) unit quaternions.
        axis: (..., 3) twist axis, any nonzero length.

    The twist is the projection of q onto the span of {identity, axis}:
    keeping the scalar part and the imaginary component along the axis,
    renormalized. The signed twist angle lies in [-pi, pi]; its sign
    follows the projection of the twist imaginary part onto the axis,
    with the input lifted to the canonical hemisphere first.
    """
    q = canonicalize_quat(normalize_quat(q))
    axis = np.asarray(axis, dtype=float)
    _check_last(axis, (3,), "axis")
    an = np.linalg.norm(axis, axis=-1, keepdims=True)
    if np.any(an < _EPS):
        raise ValueError("twist axis must be nonzero")
    axis = axis / an

    batch = np.broadcast_shapes(q.shape[:-1], axis.shape[:-1])
    q = np.broadcast_to(q, batch + (4,)).copy()
    axis = np.broadcast_to(axis, batch + (3,)).copy()

    u = np.sum(q[..., 1:] * axis, axis=-1)
    q_proj = np.concatenate([q[..., :1], u[..., None] * axis], axis=-1)
    n = np.linalg.norm(q_proj, axis=-1)
    singular = n < 1e-12

    identity = np.zeros_like(q)
    identity[..., 0] = 1.0
    safe_n = np.where(singular, 1.0, n)
    twist = np.where(singular[..., None], identity, q_proj / safe_n[..., None])
    swing = quat_multiply(q, quat_conjugate(twist))
    swing = swing / np.linalg.norm(swing, axis=-1, keepdims=True)

    u_t = np.sum(twist[..., 1:] * axis, axis=-1)
    angle = 2.0 * np.arctan2(u_t, twist[..., 0])
    angle = np.where(singular, 0.0, angle)

    return TwistDecomposition(
        swing=swing,
        twist=twist,
        twist_axis=axis,
        twist_angle=angle,
        singular=singular,
    )


def twist_quat(axis: np.ndarray, angle) -> np.ndarray:
    """Quaternion rotating by `angle` about a (nonzero) axis."""
    axis = np.asarray(axis, dtype=float)
    _check_last(axis, (3,), "axis")
    n = np.linalg.norm(axis, axis=-1, keepdims=True)
    if np.any(n < _EPS):
        raise ValueError("twist axis must be nonzero")
    angle = np.asarray(angle, dtype=float)
    return axis_angle_to_quat(axis / n * angle[..., None])


def compensation_angle(alpha_tw, twist_range: TwistRange = DEFAULT_TWIST_RANGE):
    """Twist excess to move from the wrist onto the forearm.

    Zero inside [alpha_min, alpha_max]; otherwise the signed overshoot
    past the nearer bound, so that alpha_tw - result lands back inside
    the range. Total over all inputs; broadcasts.
    """
    alpha = np.asarray(alpha_tw, dtype=float)
    over = alpha - twist_range.alpha_max
    under = np.minimum(alpha - twist_range.alpha_min, 0.0)
    out = np.where(alpha > twist_range.alpha_max, over, under)
    return float(out) if out.ndim == 0 else out
