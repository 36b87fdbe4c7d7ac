"""In-sensor depth rendering by sphere tracing the object's SDF.

Each pixel ray marches from the camera toward the gel; the stored depth is
min(object hit, membrane reference), so the object appears exactly where it
indents past the undeformed surface.  Rays that miss the object's bounding
box are culled to the background without marching.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.sdf import SdfGrid
from ..transforms import quat_rotate, quat_rotate_inv, quat_to_mat
from .camera import TactileCamera

HIT_TOLERANCE = 2e-5   # m; surface offset accepted as a hit
MAX_STEPS = 64

try:
    from numba import njit as _njit
    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is optional
    _HAVE_NUMBA = False

    def _njit(*a, **k):
        def wrap(f):
            return f
        return wrap


@dataclass
class DepthImage:
    """(..., H, W) depth in meters along each camera ray."""

    values: np.ndarray
    background: np.ndarray  # (H, W) membrane reference depth

    @property
    def height(self) -> int:
        return self.values.shape[-2]

    @property
    def width(self) -> int:
        return self.values.shape[-1]

    def indentation(self) -> np.ndarray:
        """Positive where the object indents past the membrane."""
        return np.maximum(self.background - self.values, 0.0)


def _grid_interp_distance(grid: SdfGrid, pts: np.ndarray) -> np.ndarray:
    """Trilinear SDF values with out-of-grid points given a safe lower bound
    (distance to the grid box; the surface lies inside the padded grid)."""
    dims = np.array(grid.dims)
    rel = (pts - grid.origin) / grid.spacing
    inside = np.all((rel >= 0) & (rel <= dims - 1), axis=-1)
    relc = np.clip(rel, 0, dims - 1 - 1e-9)
    i0 = np.minimum(relc.astype(np.int64), dims - 2)
    f = relc - i0
    ix, iy, iz = i0[..., 0], i0[..., 1], i0[..., 2]
    v = grid.values
    c00 = v[ix, iy, iz] * (1 - f[..., 0]) + v[ix + 1, iy, iz] * f[..., 0]
    c10 = v[ix, iy + 1, iz] * (1 - f[..., 0]) + v[ix + 1, iy + 1, iz] * f[..., 0]
    c01 = v[ix, iy, iz + 1] * (1 - f[..., 0]) + v[ix + 1, iy, iz + 1] * f[..., 0]
    c11 = v[ix, iy + 1, iz + 1] * (1 - f[..., 0]) + v[ix + 1, iy + 1, iz + 1] * f[..., 0]
    c0 = c00 * (1 - f[..., 1]) + c10 * f[..., 1]
    c1 = c01 * (1 - f[..., 1]) + c11 * f[..., 1]
    d = c0 * (1 - f[..., 2]) + c1 * f[..., 2]
    # outside: distance to the box is a valid conservative step
    out_vec = np.maximum(grid.origin - pts, 0) + np.maximum(pts - (grid.origin + grid.spacing * (dims - 1)), 0)
    box_dist = np.linalg.norm(out_vec, axis=-1)
    return np.where(inside, d, np.maximum(box_dist, grid.spacing))


def _ray_aabb(origin, dirs, lo, hi):
    """Slab test: entry/exit parameters per ray (inf when missed)."""
    inv = 1.0 / np.where(np.abs(dirs) < 1e-300, 1e-300, dirs)
    t0 = (lo - origin) * inv
    t1 = (hi - origin) * inv
    tmin = np.minimum(t0, t1).max(axis=-1)
    tmax = np.maximum(t0, t1).min(axis=-1)
    hit = tmax >= np.maximum(tmin, 0.0)
    return np.where(hit, np.maximum(tmin, 0.0), np.inf), np.where(hit, tmax, -np.inf)


def render_depth(camera: TactileCamera, object_sdf: SdfGrid,
                 object_pos, object_quat, background: np.ndarray) -> DepthImage:
    """Sphere-trace the object per pixel; depth = min(hit, membrane).

    object_pos/object_quat give the object pose in the sensor frame and may
    carry a leading env axis; the result is then (E, H, W).
    """
    object_pos = np.asarray(object_pos, dtype=np.float64)
    batched = object_pos.ndim == 2
    o_pos = np.atleast_2d(object_pos)
    o_quat = np.atleast_2d(np.asarray(object_quat, dtype=np.float64))
    E = o_pos.shape[0]
    H, W = camera.height, camera.width
    dirs = camera.rays().reshape(-1, 3)
    n_rays = dirs.shape[0]
    bg = background.reshape(-1)

    # conservative object AABB in sensor frame: rotated grid box corners
    dims = np.array(object_sdf.dims)
    corners_obj = object_sdf.origin + object_sdf.spacing * (
        np.stack(np.meshgrid([0, dims[0] - 1], [0, dims[1] - 1], [0, dims[2] - 1],
                             indexing="ij"), axis=-1).reshape(-1, 3)
    )
    cw = quat_rotate(o_quat[:, None], corners_obj[None]) + o_pos[:, None]
    lo, hi = cw.min(axis=1), cw.max(axis=1)  # (E, 3)

    t_in, t_out = _ray_aabb(camera.pos, dirs[None], lo[:, None], hi[:, None])
    bg_e = np.broadcast_to(bg, (E, n_rays))
    t_stop = np.minimum(bg_e, t_out)
    t_start = np.maximum(t_in, camera.near)
    live = (t_start <= t_stop)

    if _HAVE_NUMBA:
        rot = quat_to_mat(o_quat)  # object -> sensor; kernel uses transpose
        depth = _march_kernel(
            camera.pos, dirs, t_start, t_stop, live, bg_e.copy(),
            object_sdf.values, object_sdf.origin, object_sdf.spacing,
            np.array(object_sdf.dims, dtype=np.int64), o_pos, rot,
            HIT_TOLERANCE, MAX_STEPS,
        )
    else:
        depth = _march_numpy(camera, dirs, object_sdf, o_pos, o_quat,
                             t_start, t_stop, live, bg_e)
    depth = np.clip(depth, camera.near, camera.far).reshape(E, H, W)
    if not batched:
        depth = depth[0]
    return DepthImage(values=depth, background=background.copy())


def _march_numpy(camera, dirs, object_sdf, o_pos, o_quat, t_start, t_stop,
                 live, bg_e):
    """Vectorized fallback march (compacting the live-ray set each step)."""
    E, n_rays = t_start.shape
    live = live.reshape(-1)
    t_flat = np.where(live, t_start.reshape(-1), np.inf)
    stop_flat = t_stop.reshape(-1)
    env_of = np.repeat(np.arange(E), n_rays)
    dir_of = np.tile(dirs, (E, 1))
    hit = np.zeros(E * n_rays, dtype=bool)
    idx = np.nonzero(live)[0]
    t_live = t_flat[idx]
    for _ in range(MAX_STEPS):
        if idx.size == 0:
            break
        pts = camera.pos + dir_of[idx] * t_live[:, None]
        e_idx = env_of[idx]
        p_obj = quat_rotate_inv(o_quat[e_idx], pts - o_pos[e_idx])
        d = _grid_interp_distance(object_sdf, p_obj)
        hit_now = d < HIT_TOLERANCE
        advanced = t_live + np.maximum(d, 0.0)
        over = advanced > stop_flat[idx]
        done = hit_now | over
        if done.any():
            hit[idx[hit_now]] = True
            resolved = np.where(hit_now, t_live, np.inf)
            t_flat[idx[done]] = resolved[done]
            keep = ~done
            idx = idx[keep]
            t_live = advanced[keep]
        else:
            t_live = advanced
    if idx.size:
        t_flat[idx] = np.inf  # ran out of steps: treat as background
    return np.where(hit, np.minimum(t_flat, bg_e.reshape(-1)), bg_e.reshape(-1))


@_njit(cache=True)
def _march_kernel(cam_pos, dirs, t_start, t_stop, live, depth_out,
                  values, grid_origin, spacing, dims, o_pos, rot, tol, max_steps):
    """Serial per-ray sphere trace; depth_out arrives as background."""
    E, n_rays = t_start.shape
    nx, ny, nz = dims[0], dims[1], dims[2]
    hix = grid_origin[0] + spacing * (nx - 1)
    hiy = grid_origin[1] + spacing * (ny - 1)
    hiz = grid_origin[2] + spacing * (nz - 1)
    for e in range(E):
        r00, r01, r02 = rot[e, 0, 0], rot[e, 0, 1], rot[e, 0, 2]
        r10, r11, r12 = rot[e, 1, 0], rot[e, 1, 1], rot[e, 1, 2]
        r20, r21, r22 = rot[e, 2, 0], rot[e, 2, 1], rot[e, 2, 2]
        px, py, pz = o_pos[e, 0], o_pos[e, 1], o_pos[e, 2]
        for r in range(n_rays):
            if not live[e, r]:
                continue
            t = t_start[e, r]
            stop = t_stop[e, r]
            dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
            for _ in range(max_steps):
                wx = cam_pos[0] + dx * t - px
                wy = cam_pos[1] + dy * t - py
                wz = cam_pos[2] + dz * t - pz
                # R^T (w): sensor -> object frame
                ox = r00 * wx + r10 * wy + r20 * wz
                oy = r01 * wx + r11 * wy + r21 * wz
                oz = r02 * wx + r12 * wy + r22 * wz
                # trilinear sample with box-distance fallback outside
                if (ox < grid_origin[0] or oy < grid_origin[1] or oz < grid_origin[2]
                        or ox > hix or oy > hiy or oz > hiz):
                    bx = max(grid_origin[0] - ox, 0.0) + max(ox - hix, 0.0)
                    by = max(grid_origin[1] - oy, 0.0) + max(oy - hiy, 0.0)
                    bz = max(grid_origin[2] - oz, 0.0) + max(oz - hiz, 0.0)
                    d = max((bx * bx + by * by + bz * bz) ** 0.5, spacing)
                else:
                    gx = (ox - grid_origin[0]) / spacing
                    gy = (oy - grid_origin[1]) / spacing
                    gz = (oz - grid_origin[2]) / spacing
                    ix = min(int(gx), nx - 2)
                    iy = min(int(gy), ny - 2)
                    iz = min(int(gz), nz - 2)
                    fx = gx - ix
                    fy = gy - iy
                    fz = gz - iz
                    c00 = values[ix, iy, iz] * (1 - fx) + values[ix + 1, iy, iz] * fx
                    c10 = values[ix, iy + 1, iz] * (1 - fx) + values[ix + 1, iy + 1, iz] * fx
                    c01 = values[ix, iy, iz + 1] * (1 - fx) + values[ix + 1, iy, iz + 1] * fx
                    c11 = values[ix, iy + 1, iz + 1] * (1 - fx) + values[ix + 1, iy + 1, iz + 1] * fx
                    c0 = c00 * (1 - fy) + c10 * fy
                    c1 = c01 * (1 - fy) + c11 * fy
                    d = c0 * (1 - fz) + c1 * fz
                if d < tol:
                    if t < depth_out[e, r]:
                        depth_out[e, r] = t
                    break
                t += d
                if t > stop:
                    break
    return depth_out
