"""Visuotactile sensor description.

The sensor frame has its origin at the center of the undeformed gel surface,
+z pointing out of the pad (toward the touching object) and the camera on
the -z side looking along +z.  A flat rectangular pad is the default; a
custom surface mesh (in sensor frame) may be supplied for curved gels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry.mesh import TriMesh


def flat_pad_mesh(active_area, skirt: float = 0.002) -> TriMesh:
    """Two-triangle rectangle at z=0 covering the active area plus a skirt."""
    hx = active_area[0] / 2.0 + skirt
    hy = active_area[1] / 2.0 + skirt
    v = np.array([[-hx, -hy, 0.0], [hx, -hy, 0.0], [hx, hy, 0.0], [-hx, hy, 0.0]])
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return TriMesh(v, f)


@dataclass
class TactileSensorSpec:
    """Geometry, optics, and nominal imaging layout of one sensor."""

    name: str = "gelpad"
    active_area: tuple = (0.024, 0.018)  # sensed extent along x, y (m)
    surface_mesh: TriMesh | None = None  # sensor-frame gel surface
    gel_thickness: float = 0.004         # collision depth of the elastomer (m)
    cam_distance: float = 0.02           # camera at (0, 0, -cam_distance)
    image_size: tuple = (80, 60)         # W, H pixels
    near: float = 0.002
    far: float = 0.2

    def __post_init__(self):
        if self.surface_mesh is None:
            self.surface_mesh = flat_pad_mesh(self.active_area)

    @property
    def focal_px(self) -> float:
        # active area fills the image width exactly at the gel plane
        return self.image_size[0] * self.cam_distance / self.active_area[0]

    def is_flat(self) -> bool:
        n = self.surface_mesh.face_normals()
        return bool(np.allclose(n, n[0], atol=1e-9))
