"""Flat-shaded wrist camera: sphere-traced scene render at desk fidelity."""
from __future__ import annotations

import numpy as np

from ..render.camera import TactileCamera
from ..render.depth import render_depth
from ..transforms import quat_conj, quat_from_euler_xyz, quat_mul, quat_rotate_inv

BODY_COLORS = np.array([
    [0.8, 0.3, 0.2],   # peg
    [0.3, 0.4, 0.8],   # socket
    [0.5, 0.5, 0.5],   # table
])
LIGHT_DIR = np.array([0.3, 0.2, 0.9]) / np.linalg.norm([0.3, 0.2, 0.9])


def render_wrist(env, size=64):
    """(E, size, size, 3) flat-shaded render from a camera on the wrist.

    Each scene SDF is depth-traced separately; the per-pixel nearest body
    wins and is shaded by its gradient normal against a fixed light.
    """
    E = env.num_envs
    cam = TactileCamera(pos=np.zeros(3), fx=size * 0.9, fy=size * 0.9,
                        cx=size / 2, cy=size / 2, width=size, height=size,
                        near=0.01, far=1.0)
    far_bg = np.full((size, size), cam.far)
    # camera rigidly attached to the ee, looking down its local +z
    cam_local_pos = np.array([0.0, -0.08, 0.0])
    cam_local_quat = quat_from_euler_xyz(-0.5, 0.0, 0.0)  # pitched toward the peg

    ee_pos = env.bodies.pos[:, 0]
    ee_quat = env.bodies.quat[:, 0]
    cam_pos = ee_pos + np.einsum("ej->ej", np.zeros((E, 3)))  # placeholder add below
    from ..transforms import quat_rotate

    cam_pos = ee_pos + quat_rotate(ee_quat, cam_local_pos)
    cam_quat = quat_mul(ee_quat, cam_local_quat)

    objects = [(env.peg_sdf, env.bodies.pos[:, 1], env.bodies.quat[:, 1], 0)]
    if getattr(env, "socket_sdf", None) is not None:
        objects.append((env.socket_sdf, env.bodies.pos[:, 2], env.bodies.quat[:, 2], 1))
    objects.append((env.table_sdf, env.bodies.pos[:, 3], env.bodies.quat[:, 3], 2))

    depth = np.full((E, size, size), cam.far)
    label = np.full((E, size, size), -1, dtype=np.int64)
    normal_z = np.zeros((E, size, size))
    for sdf, pos, quat, color_id in objects:
        rel_pos = quat_rotate_inv(cam_quat, pos - cam_pos)
        rel_quat = quat_mul(quat_conj(cam_quat), quat)
        img = render_depth(cam, sdf, rel_pos, rel_quat, far_bg)
        closer = img.values < depth - 1e-6
        depth = np.where(closer, img.values, depth)
        label = np.where(closer, color_id, label)
        # cheap lambert proxy: slope of the depth image stands in for n.l
        gy, gx = np.gradient(img.values, axis=(-2, -1))
        shade = 1.0 / (1.0 + 40.0 * np.hypot(gx, gy))
        normal_z = np.where(closer, shade, normal_z)

    rgb = np.zeros((E, size, size, 3), dtype=np.float32)
    for color_id in range(len(BODY_COLORS)):
        mask = label == color_id
        tone = (0.35 + 0.65 * normal_z)[..., None]
        rgb = np.where(mask[..., None], BODY_COLORS[color_id] * tone, rgb)
    return np.clip(rgb, 0.0, 1.0).astype(np.float32)
