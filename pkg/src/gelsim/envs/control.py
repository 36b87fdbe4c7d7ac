"""Task-space impedance controller driving the free-floating end effector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..transforms import quat_conj, quat_mul, quat_normalize


@dataclass
class ImpedanceGains:
    kp_lin: float = 400.0   # N/m
    kd_lin: float = 40.0    # N*s/m
    kp_ang: float = 4.0     # N*m/rad
    kd_ang: float = 0.12    # N*m*s/rad


def orientation_error(q_target, q_current) -> np.ndarray:
    """Rotation vector (world frame) taking current to target, (..., 3)."""
    dq = quat_mul(q_target, quat_conj(q_current))
    dq = quat_normalize(dq)
    # shortest path: flip hemisphere when w < 0
    sign = np.where(dq[..., :1] < 0, -1.0, 1.0)
    dq = dq * sign
    w = np.clip(dq[..., 0], -1.0, 1.0)
    angle = 2.0 * np.arccos(w)
    s = np.sqrt(np.maximum(1.0 - w * w, 1e-16))
    axis = dq[..., 1:] / s[..., None]
    small = angle < 1e-7
    return np.where(small[..., None], 0.0, axis * angle[..., None])


def impedance_wrench(target_pos, target_quat, pos, quat, linvel, angvel,
                     gains: ImpedanceGains, mass=0.0, gravity=(0, 0, -9.81),
                     kd_lin_jitter=None):
    """PD wrench toward the target pose, with gravity compensation.

    kd_lin_jitter: optional per-env additive damping offset (the analog of
    the joint-damping randomization on a desk-scale floating effector).
    """
    kd = gains.kd_lin
    if kd_lin_jitter is not None:
        kd = kd + kd_lin_jitter
        kd = np.maximum(kd, 0.0)[..., None]
    force = gains.kp_lin * (target_pos - pos) - kd * linvel
    force = force - mass * np.asarray(gravity)
    torque = gains.kp_ang * orientation_error(target_quat, quat) - gains.kd_ang * angvel
    return force, torque
