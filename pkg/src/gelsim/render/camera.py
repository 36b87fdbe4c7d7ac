"""Pinhole tactile camera and per-pixel membrane reference depth."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry.mesh import ray_mesh_intersect
from ..sensors import TactileSensorSpec
from ..transforms import IDENTITY_QUAT, quat_rotate


@dataclass
class TactileCamera:
    """Camera at a fixed pose in the sensor frame, looking along +z."""

    pos: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -0.02]))
    quat: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    fx: float = 66.7
    fy: float = 66.7
    cx: float = 40.0
    cy: float = 30.0
    width: int = 80
    height: int = 60
    near: float = 0.002
    far: float = 0.2

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        self.quat = np.asarray(self.quat, dtype=np.float64)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")

    def rays(self):
        """Unit ray directions in the sensor frame, (H, W, 3); origin = pos."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        gu, gv = np.meshgrid(u, v, indexing="xy")
        d = np.stack([gu, gv, np.ones_like(gu)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return quat_rotate(self.quat, d)


def camera_for_sensor(sensor: TactileSensorSpec) -> TactileCamera:
    W, H = sensor.image_size
    f = sensor.focal_px
    return TactileCamera(
        pos=np.array([0.0, 0.0, -sensor.cam_distance]),
        fx=f, fy=f, cx=W / 2.0, cy=H / 2.0,
        width=W, height=H, near=sensor.near, far=sensor.far,
    )


def reference_depth(camera: TactileCamera, sensor: TactileSensorSpec) -> np.ndarray:
    """Depth (m along ray) of the undeformed gel surface per pixel.

    Rendered once per sensor configuration and cached by callers; pixels
    whose ray misses the surface mesh fall back to the far plane.
    """
    dirs = camera.rays().reshape(-1, 3)
    origins = np.broadcast_to(camera.pos, dirs.shape)
    t = ray_mesh_intersect(origins, dirs, sensor.surface_mesh)
    t = np.where(np.isfinite(t), t, camera.far)
    return np.clip(t, camera.near, camera.far).reshape(camera.height, camera.width)
