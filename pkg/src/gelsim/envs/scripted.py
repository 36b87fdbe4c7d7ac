"""Scripted oracle controllers operating on privileged state.

These are hand-written closed-loop policies used as evaluation baselines,
solvability checks, and sources of demonstration data in tests and demos.
"""
from __future__ import annotations

import numpy as np

from ..transforms import quat_rotate
from .base import ACTION_POS_LIMIT, ACTION_ROT_LIMIT
from .peg_tasks import EE, PEG, SOCKET, PegEnvBatch


def scripted_insertion_actions(env: PegEnvBatch) -> np.ndarray:
    """Align the peg tip over the socket bore, square it up, descend, seat.

    Uses exact poses (privileged); clamps to the action limits.
    """
    E = env.num_envs
    up_axis, tip = env._peg_axis_and_tip()
    socket = env.bodies.pos[:, SOCKET]
    a = np.zeros((E, 6))

    lateral = socket[:, :2] - tip[:, :2]
    lat_err = np.linalg.norm(lateral, axis=1)
    height = tip[:, 2] - socket[:, 2]

    # rotation: rotate the peg axis toward vertical (world z)
    rotvec = np.cross(up_axis, np.array([0.0, 0.0, 1.0]))
    a[:, 3:] = np.clip(1.0 * rotvec, -ACTION_ROT_LIMIT, ACTION_ROT_LIMIT)

    align_gain = 0.8
    a[:, 0:2] = np.clip(align_gain * lateral, -ACTION_POS_LIMIT, ACTION_POS_LIMIT)

    aligned = lat_err < 0.0015
    tilt_ok = up_axis[:, 2] > np.cos(np.deg2rad(4.0))
    descend = aligned & tilt_ok
    hover = ~descend & (height < 0.01)
    dz = np.where(descend, -ACTION_POS_LIMIT,
                  np.where(hover, 0.004, -0.006))
    # once inside the bore, push down firmly regardless of lateral error
    inside = height < -0.002
    dz = np.where(inside, -ACTION_POS_LIMIT, dz)
    a[:, 2] = dz
    return a


def scripted_placement_actions(env: PegEnvBatch) -> np.ndarray:
    """Carry the peg over the target point, square it up, lower, and hold."""
    E = env.num_envs
    up_axis, tip = env._peg_axis_and_tip()
    target = env.bodies.pos[:, SOCKET]
    a = np.zeros((E, 6))

    lateral = target[:, :2] - tip[:, :2]
    a[:, 0:2] = np.clip(0.8 * lateral, -ACTION_POS_LIMIT, ACTION_POS_LIMIT)
    rotvec = np.cross(up_axis, np.array([0.0, 0.0, 1.0]))
    a[:, 3:] = np.clip(1.0 * rotvec, -ACTION_ROT_LIMIT, ACTION_ROT_LIMIT)

    height = tip[:, 2] - target[:, 2]
    aligned = np.linalg.norm(lateral, axis=1) < 0.004
    tilt_ok = up_axis[:, 2] > np.cos(np.deg2rad(3.0))
    touching = height < 0.0005
    dz = np.where(aligned & tilt_ok, np.where(touching, -0.001, -0.008), 0.002)
    a[:, 2] = dz
    return a


def scripted_actions(env: PegEnvBatch) -> np.ndarray:
    if env.cfg.task == "insertion":
        return scripted_insertion_actions(env)
    return scripted_placement_actions(env)
