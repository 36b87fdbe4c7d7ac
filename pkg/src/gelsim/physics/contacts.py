"""Contact generation: SDF-sampled contact points grouped into patches.

A ContactGroup is a fixed pairing of a point-carrying body (elastomer pad,
peg shell, ...) with an SDF-carrying body.  Contacts are regenerated once per
frame: sample points that penetrate the SDF become contact points; points
with similar normals share a patch, and each patch later receives a single
Coulomb friction impulse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry.sdf import SdfGrid, query_sdf
from ..transforms import quat_rotate, transform_points, inverse_transform_points
from .bodies import BodyBatch


@dataclass
class ContactGroup:
    """Candidate contact set between one body pair.

    points_local: (P, 3) or (E, P, 3) sample points in body_a's frame.
    sdf: SdfGrid of body_b's geometry (in body_b's local frame), or a
        per-env list of grids for heterogeneous batches.
    """

    name: str
    body_a: int
    body_b: int
    points_local: np.ndarray
    sdf: SdfGrid | list
    max_patches: int = 6
    # Speculative activation margin: points within this distance above the
    # surface are tracked so the implicit law can catch touchdowns that
    # happen mid-frame (frame-start gravity arrives as one velocity pulse).
    margin: float = 0.003
    # Per-pair friction override (gel pads grip much harder than rigid
    # walls); None falls back to the scene-wide SoftContactParams.mu.
    mu: float | None = None

    def __post_init__(self):
        self.points_local = np.asarray(self.points_local, dtype=np.float64)
        if self.points_local.ndim == 2:
            self.points_local = self.points_local[None]


class Contacts:
    """Per-frame contact state for all groups, batched over environments."""

    def __init__(self, groups, num_envs):
        self.groups = list(groups)
        self.num_envs = num_envs
        sizes = [g.points_local.shape[-2] for g in self.groups]
        self.count = int(sum(sizes))
        self.group_slice = []
        self.group_of = np.zeros(self.count, dtype=np.int64)
        self.body_a = np.zeros(self.count, dtype=np.int64)
        self.body_b = np.zeros(self.count, dtype=np.int64)
        off = 0
        for gi, (g, p) in enumerate(zip(self.groups, sizes)):
            sl = slice(off, off + p)
            self.group_slice.append(sl)
            self.group_of[sl] = gi
            self.body_a[sl] = g.body_a
            self.body_b[sl] = g.body_b
            off += p
        E, C = num_envs, self.count
        self.active = np.zeros((E, C), dtype=bool)
        self.eps = np.zeros((E, C))
        self.eps_frame_mean = np.zeros((E, C))  # substep-averaged penetration
        self.normal = np.zeros((E, C, 3))
        self.pos = np.zeros((E, C, 3))
        self.r_a = np.zeros((E, C, 3))
        self.r_b = np.zeros((E, C, 3))
        self.m_eff = np.full((E, C), np.inf)
        self.lam = np.zeros((E, C))
        # patch bookkeeping: fixed slots per group
        self.num_patches = int(sum(g.max_patches for g in self.groups))
        self.patch_group = np.concatenate(
            [np.full(g.max_patches, gi, dtype=np.int64) for gi, g in enumerate(self.groups)]
        ) if self.groups else np.zeros(0, dtype=np.int64)
        self.patch_offset = np.cumsum([0] + [g.max_patches for g in self.groups])[:-1]
        self.patch_id = np.zeros((E, C), dtype=np.int64)
        self.patch_lam = np.zeros((E, self.num_patches))        # this substep
        self.patch_lam_frame = np.zeros((E, self.num_patches))  # whole frame
        self.patch_tangential = np.zeros((E, self.num_patches, 3))  # whole frame

    def relative_normal_speed(self, bodies: BodyBatch) -> np.ndarray:
        """(E, C) separation rate n . (v_a - v_b) at every slot."""
        va = bodies.linvel[:, self.body_a] + np.cross(
            bodies.angvel[:, self.body_a], self.r_a
        )
        vb = bodies.linvel[:, self.body_b] + np.cross(
            bodies.angvel[:, self.body_b], self.r_b
        )
        return np.einsum("ecj,ecj->ec", self.normal, va - vb)

    def active_count(self) -> np.ndarray:
        return self.active.sum(axis=1)

    def penetrating(self) -> np.ndarray:
        """(E, C) mask of actual contact points (negative distance)."""
        return self.active & (self.eps < 0.0)

    def penetrating_count(self) -> np.ndarray:
        return self.penetrating().sum(axis=1)


def generate_contacts(bodies: BodyBatch, groups, params) -> Contacts:
    """Query every group's sample points against its SDF and build patches."""
    contacts = Contacts(groups, bodies.num_envs)
    E = bodies.num_envs
    inv_inertia_w = bodies.world_inv_inertia()
    for gi, g in enumerate(groups):
        sl = contacts.group_slice[gi]
        pts_local = np.broadcast_to(
            g.points_local, (E,) + g.points_local.shape[-2:]
        )
        P = pts_local.shape[1]
        a, b = g.body_a, g.body_b
        pts_world = transform_points(
            bodies.pos[:, a, None], bodies.quat[:, a, None], pts_local
        )
        pts_sdf = inverse_transform_points(
            bodies.pos[:, b, None], bodies.quat[:, b, None], pts_world
        )
        d = np.full((E, P), np.inf)
        n_sdf = np.zeros((E, P, 3))
        if isinstance(g.sdf, SdfGrid):
            q = query_sdf(g.sdf, pts_sdf.reshape(-1, 3))
            d = np.where(q.valid, q.distance, np.inf).reshape(E, P)
            n_sdf = q.normal.reshape(E, P, 3)
        else:
            for env, grid in enumerate(g.sdf):
                q = query_sdf(grid, pts_sdf[env])
                d[env] = np.where(q.valid, q.distance, np.inf)
                n_sdf[env] = q.normal
        active = np.isfinite(d) & (d < g.margin)
        n_world = quat_rotate(bodies.quat[:, b, None], n_sdf)

        contacts.active[:, sl] = active
        contacts.eps[:, sl] = np.where(active, d, 0.0)
        contacts.normal[:, sl] = n_world
        contacts.pos[:, sl] = pts_world
        r_a = pts_world - bodies.pos[:, a, None]
        r_b = pts_world - bodies.pos[:, b, None]
        contacts.r_a[:, sl] = r_a
        contacts.r_b[:, sl] = r_b

        inv_m = np.zeros((E, P))
        for idx, r in ((a, r_a), (b, r_b)):
            rxn = np.cross(r, n_world)
            ang = np.cross(
                np.einsum("eij,epj->epi", inv_inertia_w[:, idx], rxn), r
            )
            inv_m = inv_m + bodies.inv_mass[:, idx, None] + np.einsum(
                "epj,epj->ep", n_world, ang
            )
        contacts.m_eff[:, sl] = np.where(inv_m > 1e-12, 1.0 / np.maximum(inv_m, 1e-12), np.inf)

        contacts.patch_id[:, sl] = contacts.patch_offset[gi] + _assign_patches(
            n_world, active, g.max_patches, params.patch_normal_cos_threshold
        )
    return contacts


def _assign_patches(normals, active, max_patches, cos_threshold):
    """Greedy normal-similarity clustering, lockstep across environments."""
    E, P, _ = normals.shape
    if max_patches == 1:
        return np.zeros((E, P), dtype=np.int64)
    mean = np.zeros((E, max_patches, 3))
    used = np.zeros((E, max_patches), dtype=bool)
    n_open = np.zeros(E, dtype=np.int64)
    out = np.zeros((E, P), dtype=np.int64)
    rows = np.arange(E)
    for j in range(P):
        nj = normals[:, j]
        act = active[:, j]
        mnorm = np.linalg.norm(mean, axis=2)
        cos = np.where(
            used, np.einsum("ekj,ej->ek", mean, nj) / np.maximum(mnorm, 1e-12), -2.0
        )
        best = np.argmax(cos, axis=1)
        best_cos = cos[rows, best]
        make_new = act & (best_cos < cos_threshold) & (n_open < max_patches)
        pid = np.where(make_new, n_open, best)
        pid = np.where(act, pid, 0)
        out[:, j] = pid
        upd = rows[act]
        np.add.at(mean, (upd, pid[act]), nj[act])
        used[upd, pid[act]] = True
        n_open += make_new
    # one refinement pass against the final means: undoes running-mean drift
    mnorm = np.linalg.norm(mean, axis=2, keepdims=True)
    unit = mean / np.maximum(mnorm, 1e-12)
    cos = np.where(used[:, None, :], np.einsum("ekj,epj->epk", unit, normals), -2.0)
    refined = np.argmax(cos, axis=2)
    return np.where(active, refined, 0)
