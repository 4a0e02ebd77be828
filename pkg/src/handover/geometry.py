"""Quaternion and rotation primitives shared by every other module.

Quaternions are numpy arrays in scalar-first order ``[w, x, y, z]`` and are
kept at unit norm.  All operations broadcast over leading axes, so a stack of
quaternions ``(N, 4)`` works the same as a single one ``(4,)``.  Angular
velocities are expressed in the world frame throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def skew(v):
    """Skew-symmetric matrix of a 3-vector, so that skew(a) @ b == cross(a, b).

    Broadcasts: input (..., 3) gives (..., 3, 3).
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def cross3(a, b):
    """cross(a, b) over (..., 3) arrays.

    np.cross spends most of its time on axis bookkeeping, which dominates the
    dynamics recursions at 1 kHz; this computes the same components with the
    same operation order, so results are bit-identical.
    """
    if a.ndim == 1 and b.ndim == 1:
        out = np.empty(3)
        out[0] = a[1] * b[2] - a[2] * b[1]
        out[1] = a[2] * b[0] - a[0] * b[2]
        out[2] = a[0] * b[1] - a[1] * b[0]
        return out
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0],
                    axis=-1)


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_conjugate(q):
    """Inverse of a unit quaternion: [w, -x, -y, -z]."""
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def quat_product(a, b):
    """Hamilton product a * b (composes rotations: R(a*b) = R(a) @ R(b))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    # Same term order as quat_ominus so both code paths agree bit for bit.
    v = bw * av + aw * bv + cross3(av, bv)
    return np.concatenate([w, v], axis=-1)


def quat_ominus(a, b):
    """Vector part of the product a * b, used as the orientation error measure.

    Evaluates ``bw*av + aw*bv + cross(av, bv)`` directly; it is exactly zero
    when b is the inverse of a.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    return bw * av + aw * bv + cross3(av, bv)


def quat_to_rotation(q):
    """Unit quaternion to 3x3 rotation matrix."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def rotation_to_quat(R):
    """3x3 rotation matrix to unit quaternion with non-negative scalar part.

    Shepperd's method: picks the largest of the four squared components to
    stay well conditioned for any rotation.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise ValueError("rotation_to_quat expects a single 3x3 matrix")
    t = np.trace(R)
    if t > R[0, 0] and t > R[1, 1] and t > R[2, 2]:
        r = np.sqrt(1.0 + t)
        s = 0.5 / r
        q = np.array([0.5 * r, (R[2, 1] - R[1, 2]) * s,
                      (R[0, 2] - R[2, 0]) * s, (R[1, 0] - R[0, 1]) * s])
    else:
        i = int(np.argmax([R[0, 0], R[1, 1], R[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        s = 0.5 / r
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) * s
        q[1 + i] = 0.5 * r
        q[1 + j] = (R[j, i] + R[i, j]) * s
        q[1 + k] = (R[k, i] + R[i, k]) * s
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle):
    """Unit quaternion for a rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return QUAT_IDENTITY.copy()
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def quat_axis_angle(q):
    """Axis and angle (in [0, pi]) of a unit quaternion, shortest arc."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    vn = np.linalg.norm(q[1:])
    angle = 2.0 * np.arctan2(vn, q[0])
    if vn < 1e-12:
        return np.array([1.0, 0.0, 0.0]), 0.0
    return q[1:] / vn, angle


def quat_geodesic_angle(a, b):
    """Geodesic angle in [0, pi] between the rotations of two unit quaternions."""
    e = quat_product(np.asarray(a, dtype=float), quat_conjugate(b))
    s = np.linalg.norm(e[..., 1:], axis=-1)
    return 2.0 * np.arctan2(s, np.abs(e[..., 0]))


def integrate_quat(q, omega, dt):
    """Rotate q by the exponential of a world-frame angular velocity over dt.

    q' = exp(omega * dt) * q, renormalized.
    """
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega) * dt
    if theta < 1e-14:
        return quat_normalize(q)
    dq = quat_from_axis_angle(omega, theta)
    return quat_normalize(quat_product(dq, q))


def quat_align(q, reference):
    """Flip the sign of q if it sits on the far cover from `reference`.

    Used to keep quaternion time series continuous so the feedback error
    takes the short way around.
    """
    q = np.asarray(q, dtype=float)
    if float(np.dot(q, np.asarray(reference, dtype=float))) < 0.0:
        return -q
    return q


def random_quat(rng):
    """Uniformly distributed unit quaternion (scalar sign unconstrained)."""
    return quat_normalize(rng.standard_normal(4))


@dataclass
class Pose:
    """Rigid-body pose: world position [m] plus unit quaternion orientation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: QUAT_IDENTITY.copy())

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = quat_normalize(
            np.asarray(self.orientation, dtype=float).reshape(4))

    @property
    def rotation(self):
        return quat_to_rotation(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        """Pose of `other` expressed through this one: T = self o other."""
        return Pose(self.position + self.rotation @ other.position,
                    quat_product(self.orientation, other.orientation))

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.orientation)
        return Pose(-(quat_to_rotation(qinv) @ self.position), qinv)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())

    @classmethod
    def identity(cls) -> "Pose":
        return cls()
