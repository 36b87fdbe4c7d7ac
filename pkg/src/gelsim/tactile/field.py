"""Normal/shear force-field extraction at the tactile points.

Per point, with interpenetration d < 0, outward object normal n = grad(d),
penetration rate d_dot = n . x_dot and slip velocity v_t = x_dot - d_dot n:

    f_n = (-k_n + k_d * d_dot) * d * n         (clamped repulsive)
    f_t = -v_t/|v_t| * min(k_t |v_t|, mu |f_n|)

x_dot is the velocity of the tactile point relative to the object, taken at
the point itself, so d_dot is exactly the chain-rule rate of the SDF value.
Forces are reported in the sensor frame.  This is a pure observation model:
nothing here feeds back into the dynamics solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..geometry.sdf import SdfGrid, query_sdf
from ..transforms import quat_rotate, quat_rotate_inv
from .points import TactilePointGrid

SLIP_VELOCITY_EPS = 1e-9  # m/s; below this the shear formula is 0/0 -> 0


@dataclass
class PenaltyParams:
    k_n: float = 1000.0  # normal stiffness, N/m
    k_d: float = 100.0   # normal damping on d*d_dot, N*s/m^2
    k_t: float = 10.0    # shear stiffness vs slip speed, N*s/m
    mu: float = 2.0      # friction coefficient

    def __post_init__(self):
        if min(self.k_n, self.k_d, self.k_t, self.mu) < 0:
            raise ValueError("penalty parameters must be non-negative")


@dataclass
class ForceField:
    """Per-point normal and shear force vectors, sensor frame, (..., R, C, 3)."""

    f_n: np.ndarray
    f_t: np.ndarray
    env_index: int | None = None
    frame_index: int | None = None

    @property
    def rows(self) -> int:
        return self.f_n.shape[-3]

    @property
    def cols(self) -> int:
        return self.f_n.shape[-2]

    def net(self) -> np.ndarray:
        return self.f_n.sum(axis=(-3, -2)) + self.f_t.sum(axis=(-3, -2))


def penalty_forces(d, d_dot, n, v_t, params: PenaltyParams):
    """Vectorized force formulas; inputs broadcast, d >= 0 yields zeros."""
    d = np.asarray(d, dtype=np.float64)
    contact = d < 0.0
    coeff = np.where(contact, (-params.k_n + params.k_d * np.asarray(d_dot)) * d, 0.0)
    coeff = np.maximum(coeff, 0.0)  # repulsive half-space only
    f_n = coeff[..., None] * np.asarray(n, dtype=np.float64)
    fn_mag = coeff  # |f_n| since |n| = 1

    v_t = np.asarray(v_t, dtype=np.float64)
    speed = np.linalg.norm(v_t, axis=-1)
    slipping = contact & (speed > SLIP_VELOCITY_EPS)
    mag = np.minimum(params.k_t * speed, params.mu * fn_mag)
    scale = np.where(slipping, mag / np.where(slipping, speed, 1.0), 0.0)
    f_t = -scale[..., None] * v_t
    return f_n, f_t


def compute_force_field(points: TactilePointGrid, object_sdf: SdfGrid,
                        object_pos, object_quat, object_linvel, object_angvel,
                        sensor_pos, sensor_quat, sensor_linvel, sensor_angvel,
                        params: PenaltyParams, frame_index=None,
                        return_kinematics=False):
    """Evaluate the force field for one or a batch of environments.

    Pose/velocity arguments broadcast over a leading env axis; the returned
    arrays are (E, rows, cols, 3) when batched, (rows, cols, 3) otherwise.
    With return_kinematics, also returns {d, d_dot, v_t, n} (world frame).
    """
    object_pos = np.asarray(object_pos, dtype=np.float64)
    batched = object_pos.ndim == 2
    def bat(x):
        x = np.asarray(x, dtype=np.float64)
        return x if x.ndim == 2 else x[None]

    o_pos, o_quat = bat(object_pos), bat(object_quat)
    o_v, o_w = bat(object_linvel), bat(object_angvel)
    s_pos, s_quat = bat(sensor_pos), bat(sensor_quat)
    s_v, s_w = bat(sensor_linvel), bat(sensor_angvel)
    E = max(o_pos.shape[0], s_pos.shape[0])
    R, C = points.rows, points.cols

    pts = points.points.reshape(1, -1, 3)
    p_world = quat_rotate(s_quat[:, None], np.broadcast_to(pts, (E, R * C, 3))) \
        + s_pos[:, None]
    p_obj = quat_rotate_inv(o_quat[:, None], p_world - o_pos[:, None])
    q = query_sdf(object_sdf, p_obj.reshape(-1, 3))
    d = np.where(q.valid, q.distance, np.inf).reshape(E, R * C)
    n_world = quat_rotate(o_quat[:, None], q.normal.reshape(E, R * C, 3))

    v_point = s_v[:, None] + np.cross(s_w[:, None], p_world - s_pos[:, None])
    v_obj_at = o_v[:, None] + np.cross(o_w[:, None], p_world - o_pos[:, None])
    x_dot = v_point - v_obj_at
    d_dot = np.einsum("epj,epj->ep", n_world, x_dot)
    v_t = x_dot - d_dot[..., None] * n_world

    f_n_w, f_t_w = penalty_forces(d, d_dot, n_world, v_t, params)
    f_n = quat_rotate_inv(s_quat[:, None], f_n_w).reshape(E, R, C, 3)
    f_t = quat_rotate_inv(s_quat[:, None], f_t_w).reshape(E, R, C, 3)
    if not batched:
        f_n, f_t = f_n[0], f_t[0]
    fld = ForceField(f_n=f_n, f_t=f_t, frame_index=frame_index)
    if not return_kinematics:
        return fld
    def shape(x):
        x = x.reshape((E, R, C) + x.shape[2:])
        return x if batched else x[0]
    kin = {"d": shape(d), "d_dot": shape(d_dot), "v_t": shape(v_t), "n": shape(n_world)}
    return fld, kin


def net_wrench(fld: ForceField, points: TactilePointGrid):
    """Total force and torque about the sensor origin, sensor frame."""
    if fld.f_n.shape[-3:-1] != (points.rows, points.cols):
        raise DimensionMismatch(
            f"field {fld.f_n.shape[-3:-1]} vs grid {(points.rows, points.cols)}"
        )
    f = fld.f_n + fld.f_t
    force = f.sum(axis=(-3, -2))
    torque = np.cross(points.points, f).sum(axis=(-3, -2))
    return force, torque
