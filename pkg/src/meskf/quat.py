"""Hamilton quaternions, scalar-first, passive body-to-world.

Kept deliberately small; only what the measurement models need. All
functions take and return plain (4,) arrays (w, x, y, z) unless a
``_many`` suffix says otherwise.
"""

import numpy as np


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so the scalar part is non-negative."""
    q = np.asarray(q, dtype=float)
    return -q if q[0] < 0 else q.copy()


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def multiply_many(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of (N, 4) quaternion arrays."""
    w1, x1, y1, z1 = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    w2, x2, y2, z2 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=1)


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def from_rotvec(v: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector -> quaternion."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return normalize(np.array([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]]))
    return from_axis_angle(v / angle, angle)


def to_rotvec(q: np.ndarray) -> np.ndarray:
    """Logarithmic map: quaternion -> rotation vector (angle in [0, pi])."""
    q = canonicalize(normalize(q))
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return q[1:] * (angle / s)


def z_rotation(angle: float) -> np.ndarray:
    return np.array([np.cos(0.5 * angle), 0.0, 0.0, np.sin(0.5 * angle)])


def to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def from_matrix(r: np.ndarray) -> np.ndarray:
    return from_matrix_many(np.asarray(r, dtype=float)[None])[0]


def from_matrix_many(r: np.ndarray) -> np.ndarray:
    """(N, 3, 3) rotation matrices -> (N, 4) canonical unit quaternions.

    Shepperd's method with the numerically largest pivot per matrix.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    q = np.empty((n, 4))
    tr = r[:, 0, 0] + r[:, 1, 1] + r[:, 2, 2]
    cand = np.stack([tr, r[:, 0, 0], r[:, 1, 1], r[:, 2, 2]], axis=1)
    which = np.argmax(cand, axis=1)
    for case in range(4):
        idx = np.nonzero(which == case)[0]
        if idx.size == 0:
            continue
        m = r[idx]
        if case == 0:
            s = np.sqrt(1.0 + tr[idx]) * 2.0
            q[idx, 0] = 0.25 * s
            q[idx, 1] = (m[:, 2, 1] - m[:, 1, 2]) / s
            q[idx, 2] = (m[:, 0, 2] - m[:, 2, 0]) / s
            q[idx, 3] = (m[:, 1, 0] - m[:, 0, 1]) / s
        else:
            i = case - 1
            j, k = (i + 1) % 3, (i + 2) % 3
            s = np.sqrt(1.0 + m[:, i, i] - m[:, j, j] - m[:, k, k]) * 2.0
            q[idx, 0] = (m[:, k, j] - m[:, j, k]) / s
            q[idx, 1 + i] = 0.25 * s
            q[idx, 1 + j] = (m[:, j, i] + m[:, i, j]) / s
            q[idx, 1 + k] = (m[:, k, i] + m[:, i, k]) / s
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1.0
    return q


def small_angle(q_err: np.ndarray) -> np.ndarray:
    """Small-angle vector 2*vec(q) of an error quaternion, sign-safe."""
    q = np.asarray(q_err, dtype=float)
    if q[0] < 0:
        q = -q
    return 2.0 * q[1:]


def from_tait_bryan(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic z-y-x (yaw, pitch, roll) Tait-Bryan angles -> quaternion."""
    qz = z_rotation(yaw)
    qy = from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return multiply(multiply(qz, qy), qx)
