"""Quaternion / rigid-transform helpers, vectorized over leading axes.

Quaternions are (w, x, y, z), kept unit-norm by the integrators.
"""
from __future__ import annotations

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_mul(a, b):
    aw, ax, ay, az = np.moveaxis(np.asarray(a), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q, v):
    """Rotate vectors v (..., 3) by quaternions q (..., 4)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_rotate_inv(q, v):
    return quat_rotate(quat_conj(q), v)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=np.float64)
    half = angle / 2.0
    s = np.sin(half)
    return np.concatenate(
        [np.cos(half)[..., None], axis * s[..., None]], axis=-1
    )


def quat_from_euler_xyz(rx, ry, rz):
    """Intrinsic XYZ Euler angles to quaternion (broadcasting scalars ok)."""
    qx = quat_from_axis_angle(np.array([1.0, 0, 0]), np.asarray(rx))
    qy = quat_from_axis_angle(np.array([0, 1.0, 0]), np.asarray(ry))
    qz = quat_from_axis_angle(np.array([0, 0, 1.0]), np.asarray(rz))
    return quat_mul(quat_mul(qx, qy), qz)


def quat_integrate(q, omega, h):
    """First-order quaternion update from world-frame angular velocity."""
    omega = np.asarray(omega, dtype=np.float64)
    dq = quat_mul(
        np.concatenate([np.zeros_like(omega[..., :1]), omega], axis=-1), q
    )
    return quat_normalize(q + 0.5 * h * dq)


def quat_to_mat(q):
    w, x, y, z = np.moveaxis(quat_normalize(q), -1, 0)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.stack(
        [
            1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
            2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
            2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy),
        ],
        axis=-1,
    )
    return m.reshape(m.shape[:-1] + (3, 3))


def quat_angle(q):
    """Rotation angle of q in [0, pi]."""
    q = quat_normalize(q)
    return 2.0 * np.arccos(np.clip(np.abs(q[..., 0]), -1.0, 1.0))


def transform_points(pos, quat, points):
    """Apply rigid transform (pos, quat) to points (..., 3)."""
    return quat_rotate(quat, points) + pos


def inverse_transform_points(pos, quat, points):
    return quat_rotate_inv(quat, points - pos)
