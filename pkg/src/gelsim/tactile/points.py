"""Tactile point grids sampled over the sensor surface."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ResolutionTooFine
from ..geometry.mesh import ray_mesh_intersect
from ..sensors import TactileSensorSpec


@dataclass
class TactilePointGrid:
    """rows x cols sample points on the gel surface, in sensor frame."""

    points: np.ndarray        # (rows, cols, 3)
    rest_normals: np.ndarray  # (rows, cols, 3) outward surface normals
    spacing: tuple            # (dx, dy) meters

    @property
    def rows(self) -> int:
        return self.points.shape[0]

    @property
    def cols(self) -> int:
        return self.points.shape[1]

    def flat(self) -> np.ndarray:
        return self.points.reshape(-1, 3)


def sample_tactile_points(sensor: TactileSensorSpec, rows: int, cols: int) -> TactilePointGrid:
    """Uniform grid over the active area, projected onto the gel surface.

    Grid element [r, c] sits at x = c-th station, y = r-th station; spacing
    is extent/(n-1) so the grid spans the full active area.
    """
    ax, ay = sensor.active_area
    dx = ax / (cols - 1) if cols > 1 else ax
    dy = ay / (rows - 1) if rows > 1 else ay
    if not sensor.is_flat():
        feature = float(sensor.surface_mesh.edge_lengths().min())
        if min(dx, dy) < feature / 4.0:
            raise ResolutionTooFine(
                f"grid spacing {min(dx, dy):.2e} under mesh feature {feature:.2e}/4"
            )
    xs = np.linspace(-ax / 2, ax / 2, cols)
    ys = np.linspace(-ay / 2, ay / 2, rows)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")

    if sensor.is_flat():
        z0 = float(sensor.surface_mesh.vertices[0, 2])
        pts = np.stack([gx, gy, np.full_like(gx, z0)], axis=-1)
        normals = np.zeros_like(pts)
        normals[..., 2] = 1.0
        return TactilePointGrid(points=pts, rest_normals=normals, spacing=(dx, dy))

    # curved gel: drop rays from above onto the surface mesh
    origins = np.stack([gx, gy, np.full_like(gx, 1.0)], axis=-1).reshape(-1, 3)
    dirs = np.tile(np.array([0.0, 0.0, -1.0]), (len(origins), 1))
    t = ray_mesh_intersect(origins, dirs, sensor.surface_mesh)
    if not np.all(np.isfinite(t)):
        raise ValueError("active area extends beyond the surface mesh")
    pts = (origins + dirs * t[:, None]).reshape(rows, cols, 3)
    normals = _surface_normals(sensor, pts.reshape(-1, 3)).reshape(rows, cols, 3)
    return TactilePointGrid(points=pts, rest_normals=normals, spacing=(dx, dy))


def _surface_normals(sensor, pts):
    # nearest-face normal; adequate for the smooth gels used here
    tri = sensor.surface_mesh.triangles
    centroids = tri.mean(axis=1)
    fn = sensor.surface_mesh.face_normals()
    d2 = ((pts[:, None] - centroids[None]) ** 2).sum(-1)
    nearest = np.argmin(d2, axis=1)
    n = fn[nearest]
    return n * np.sign(n[:, 2:3])  # outward = +z hemisphere
