"""Sequential-impulse solver with implicit Kelvin-Voigt soft contacts.

Each frame: external forces are folded into the velocities once, then the
frame is subdivided into substeps.  Every substep runs the contact
constraints in a fixed order (Gauss-Seidel), applies a single Coulomb
friction impulse per contact patch, integrates positions by dt/N, and
advances the tracked penetration depths with the end-of-substep velocities.

The normal impulse solves the spring-damper law at the end-of-substep state
(implicit spring), which keeps stiff contacts stable:

    lam = max(0, (-h*kappa*eps - alpha*eps_dot) / (1 + alpha/m)),
    alpha = h*(h*kappa + c)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonPositiveInertia, SolverDiverged
from ..transforms import quat_integrate
from .bodies import BodyBatch
from .contacts import Contacts

STICK_VELOCITY_EPS = 1e-6  # m/s; Coulomb direction is undefined at v_t = 0


@dataclass
class SoftContactParams:
    """Spring-damper contact constants; kappa/c/mu may be per-env arrays."""

    kappa: float | np.ndarray = 200.0   # N/m
    c: float | np.ndarray = 1.0         # N*s/m
    mu: float | np.ndarray = 0.8
    patch_normal_cos_threshold: float = float(np.cos(np.deg2rad(10.0)))

    def __post_init__(self):
        if np.any(np.asarray(self.kappa) <= 0):
            raise ValueError("kappa must be positive")
        if np.any(np.asarray(self.c) < 0) or np.any(np.asarray(self.mu) < 0):
            raise ValueError("c and mu must be non-negative")
        if not (0.0 < self.patch_normal_cos_threshold <= 1.0):
            raise ValueError("patch_normal_cos_threshold must be in (0, 1]")


@dataclass
class SolverConfig:
    dt: float = 1.0 / 60.0
    substeps: int = 4
    mode: str = "sequential"  # "sequential" (per-contact Gauss-Seidel) or
    #                           "grouped" (per-group block with mass splitting)
    # Cap on the post-impulse separation speed.  Without it, a deep impact
    # that slipped past the contact margin turns its whole penetration into
    # a launch velocity (energy gain) at high kappa.  Must sit well above the
    # per-frame gravity kick g*dt so it never binds in normal dynamics.
    max_depenetration_velocity: float = 0.5

    def __post_init__(self):
        if self.dt <= 0 or self.substeps < 1:
            raise ValueError("dt must be positive and substeps >= 1")
        if self.mode not in ("sequential", "grouped"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


def contact_impulse_implicit(eps, eps_dot, m_eff, params: SoftContactParams, h):
    """Closed-form implicit-spring contact impulse (unilateral, clamped)."""
    if h <= 0:
        raise ValueError("substep duration must be positive")
    m = np.asarray(m_eff, dtype=np.float64)
    if np.any(m <= 0):
        raise NonPositiveInertia("effective inertia must be positive")
    kappa = np.asarray(params.kappa, dtype=np.float64)
    c = np.asarray(params.c, dtype=np.float64)
    alpha = h * (h * kappa + c)
    lam = (-h * kappa * np.asarray(eps) - alpha * np.asarray(eps_dot)) / (1.0 + alpha / m)
    return np.maximum(lam, 0.0)


def apply_patch_friction(total_normal_impulse, v_t, m_eff_t, mu):
    """Single Coulomb friction impulse for one patch.

    Opposes the patch tangential velocity; magnitude is the smaller of the
    full-arrest impulse m_eff_t*|v_t| (stick) and the cone bound mu*sum(lam)
    (slip).  Exactly zero below the stick velocity threshold.
    """
    v_t = np.asarray(v_t, dtype=np.float64)
    speed = np.linalg.norm(v_t, axis=-1)
    moving = speed > STICK_VELOCITY_EPS
    mag = np.minimum(np.asarray(m_eff_t) * speed, np.asarray(mu) * np.asarray(total_normal_impulse))
    safe = np.where(moving, speed, 1.0)
    return np.where(moving[..., None], -(mag / safe)[..., None] * v_t, 0.0)


def _per_env_cols(params: SoftContactParams) -> SoftContactParams:
    """Per-env (E,) parameter arrays as (E, 1) columns for (E, P) broadcasting."""
    def col(x):
        x = np.asarray(x, dtype=np.float64)
        return x[:, None] if x.ndim == 1 else x
    if np.ndim(params.kappa) == 0 and np.ndim(params.c) == 0:
        return params
    out = object.__new__(SoftContactParams)
    out.kappa = col(params.kappa)
    out.c = col(params.c)
    out.mu = params.mu
    out.patch_normal_cos_threshold = params.patch_normal_cos_threshold
    return out


def _point_velocity(bodies: BodyBatch, body_idx, r):
    """Velocity of a point rigidly attached at lever arm r from the COM."""
    if body_idx < 0:
        return 0.0
    return bodies.linvel[:, body_idx] + np.cross(bodies.angvel[:, body_idx], r)


def _apply_impulse(bodies: BodyBatch, inv_inertia_w, body_idx, r, impulse):
    if body_idx < 0:
        return
    bodies.linvel[:, body_idx] += bodies.inv_mass[:, body_idx, None] * impulse
    bodies.angvel[:, body_idx] += np.einsum(
        "eij,ej->ei", inv_inertia_w[:, body_idx], np.cross(r, impulse)
    )


def _tangential_m_eff(bodies, inv_inertia_w, a, b, r_a, r_b, t_hat):
    inv_m = np.zeros(bodies.num_envs)
    for idx, r in ((a, r_a), (b, r_b)):
        if idx < 0:
            continue
        inv_m = inv_m + bodies.inv_mass[:, idx]
        rxt = np.cross(r, t_hat)
        inv_m = inv_m + np.einsum(
            "ej,ej->e", t_hat, np.cross(np.einsum("eij,ej->ei", inv_inertia_w[:, idx], rxt), r)
        )
    return 1.0 / np.maximum(inv_m, 1e-12)


def solver_step(bodies: BodyBatch, contacts: Contacts, config: SolverConfig,
                params: SoftContactParams, gravity=(0.0, 0.0, -9.81),
                ext_force=None, ext_torque=None):
    """Advance one frame; mutates `bodies` in place and returns it.

    ext_force/ext_torque: optional (E, B, 3) world-frame loads applied over
    the whole frame along with gravity, before the substep loop.

    Returns (bodies, group_forces): per contact-group net frame-averaged
    force on body_a, shape (E, 3) each, for privileged-state reporting.
    """
    dt = config.dt
    h = dt / config.substeps
    inv_inertia_w = bodies.world_inv_inertia()

    # External loads are spread over the substeps: the resting equilibrium of
    # the implicit contact then sits exactly at eps = -m g / kappa at every
    # substep boundary (frame-level application would inject the whole
    # velocity kick at once and bias the contact cycle).
    dyn = bodies.inv_mass > 0
    dv_ext = np.where(dyn[..., None], h * np.asarray(gravity), 0.0)
    if ext_force is not None:
        dv_ext = dv_ext + h * bodies.inv_mass[..., None] * ext_force
    dw_ext = None
    if ext_torque is not None:
        dw_ext = h * np.einsum("ebij,ebj->ebi", inv_inertia_w, ext_torque)

    group_impulse = {g.name: np.zeros((bodies.num_envs, 3)) for g in contacts.groups}

    for _ in range(config.substeps):
        bodies.linvel += dv_ext
        if dw_ext is not None:
            bodies.angvel += dw_ext
        contacts.eps_frame_mean += contacts.eps / config.substeps
        if config.mode == "sequential":
            _substep_sequential(bodies, contacts, inv_inertia_w, params, h,
                                config.max_depenetration_velocity, group_impulse)
        else:
            _substep_grouped(bodies, contacts, inv_inertia_w, params, h,
                             config.max_depenetration_velocity, group_impulse)
        _friction_pass(bodies, contacts, inv_inertia_w, params, group_impulse)
        _integrate(bodies, contacts, h)
        _check_finite(bodies, contacts)

    forces = {name: imp / dt for name, imp in group_impulse.items()}
    return bodies, forces


def _depenetration_cap(lam, eps_dot, m_eff, v_max):
    """Bound the post-impulse separation speed: a deep impact may be arrested
    but not converted into a launch faster than v_max (no energy gain)."""
    cap = np.asarray(m_eff) * np.maximum(v_max - eps_dot, 0.0)
    return np.minimum(lam, np.where(np.isfinite(cap), cap, lam))


def _substep_sequential(bodies, contacts, inv_inertia_w, params, h, v_max, group_impulse):
    contacts.patch_lam[:] = 0.0
    for j in range(contacts.count):
        act = contacts.active[:, j]
        if not act.any():
            continue
        a, b = contacts.body_a[j], contacts.body_b[j]
        n = contacts.normal[:, j]
        v_rel = _point_velocity(bodies, a, contacts.r_a[:, j]) - _point_velocity(
            bodies, b, contacts.r_b[:, j]
        )
        eps_dot = np.einsum("ej,ej->e", n, v_rel)
        lam = contact_impulse_implicit(
            contacts.eps[:, j], eps_dot, contacts.m_eff[:, j], params, h
        )
        lam = _depenetration_cap(lam, eps_dot, contacts.m_eff[:, j], v_max)
        lam = np.where(act, lam, 0.0)
        impulse = lam[:, None] * n
        _apply_impulse(bodies, inv_inertia_w, a, contacts.r_a[:, j], impulse)
        _apply_impulse(bodies, inv_inertia_w, b, contacts.r_b[:, j], -impulse)
        contacts.lam[:, j] += lam
        pid = contacts.patch_id[:, j]
        rows = np.arange(bodies.num_envs)
        contacts.patch_lam[rows, pid] += lam
        contacts.patch_lam_frame[rows, pid] += lam
        group_impulse[contacts.groups[contacts.group_of[j]].name] += impulse


def _substep_grouped(bodies, contacts, inv_inertia_w, params, h, v_max, group_impulse):
    """Block solve per group: contact impulses computed in parallel with the
    per-contact inertia split by the number of active contacts in the group
    (mass splitting), then applied as one net impulse."""
    contacts.patch_lam[:] = 0.0
    rows = np.arange(bodies.num_envs)
    for gi, g in enumerate(contacts.groups):
        sl = contacts.group_slice[gi]
        act = contacts.active[:, sl]
        if not act.any():
            continue
        a, b = g.body_a, g.body_b
        n = contacts.normal[:, sl]
        r_a = contacts.r_a[:, sl]
        r_b = contacts.r_b[:, sl]
        v_a = bodies.linvel[:, a, None] + np.cross(bodies.angvel[:, a, None], r_a) \
            if a >= 0 else 0.0
        v_b = bodies.linvel[:, b, None] + np.cross(bodies.angvel[:, b, None], r_b) \
            if b >= 0 else 0.0
        eps_dot = np.einsum("epj,epj->ep", n, v_a - v_b)
        k_active = np.maximum(act.sum(axis=1, keepdims=True), 1)
        m_split = contacts.m_eff[:, sl] / k_active
        lam = contact_impulse_implicit(
            contacts.eps[:, sl], eps_dot, m_split, _per_env_cols(params), h
        )
        lam = _depenetration_cap(lam, eps_dot, m_split, v_max)
        lam = np.where(act, lam, 0.0)
        impulse = lam[..., None] * n
        net = impulse.sum(axis=1)
        if a >= 0:
            bodies.linvel[:, a] += bodies.inv_mass[:, a, None] * net
            torque = np.cross(r_a, impulse).sum(axis=1)
            bodies.angvel[:, a] += np.einsum("eij,ej->ei", inv_inertia_w[:, a], torque)
        if b >= 0:
            bodies.linvel[:, b] -= bodies.inv_mass[:, b, None] * net
            torque = np.cross(r_b, impulse).sum(axis=1)
            bodies.angvel[:, b] -= np.einsum("eij,ej->ei", inv_inertia_w[:, b], torque)
        contacts.lam[:, sl] += lam
        pid = contacts.patch_id[:, sl]
        np.add.at(contacts.patch_lam, (rows[:, None], pid), lam)
        np.add.at(contacts.patch_lam_frame, (rows[:, None], pid), lam)
        group_impulse[g.name] += net


def _friction_pass(bodies, contacts, inv_inertia_w, params, group_impulse):
    for p in range(contacts.num_patches):
        lam_n = contacts.patch_lam[:, p]
        act = lam_n > 0
        if not act.any():
            continue
        gi = contacts.patch_group[p]
        g = contacts.groups[gi]
        sl = contacts.group_slice[gi]
        members = contacts.patch_id[:, sl] == p
        w = np.where(members, contacts.lam[:, sl], 0.0)
        w_sum = np.maximum(w.sum(axis=1, keepdims=True), 1e-30)
        centroid = (w[..., None] * contacts.pos[:, sl]).sum(axis=1) / w_sum
        n_bar = (w[..., None] * contacts.normal[:, sl]).sum(axis=1)
        n_norm = np.linalg.norm(n_bar, axis=1, keepdims=True)
        n_bar = n_bar / np.maximum(n_norm, 1e-12)

        a, b = g.body_a, g.body_b
        r_a = centroid - (bodies.pos[:, a] if a >= 0 else 0.0)
        r_b = centroid - (bodies.pos[:, b] if b >= 0 else 0.0)
        v_rel = _point_velocity(bodies, a, r_a) - _point_velocity(bodies, b, r_b)
        v_t = v_rel - np.einsum("ej,ej->e", n_bar, v_rel)[:, None] * n_bar
        speed = np.linalg.norm(v_t, axis=1)
        moving = act & (speed > STICK_VELOCITY_EPS)
        if not moving.any():
            continue
        t_hat = v_t / np.maximum(speed, 1e-30)[:, None]
        m_t = _tangential_m_eff(bodies, inv_inertia_w, a, b, r_a, r_b, t_hat)
        mu_val = params.mu if g.mu is None else g.mu
        mu = np.broadcast_to(np.asarray(mu_val, dtype=np.float64), lam_n.shape)
        mag = np.minimum(m_t * speed, mu * lam_n)
        impulse = np.where(moving[:, None], -mag[:, None] * t_hat, 0.0)
        _apply_impulse(bodies, inv_inertia_w, a, r_a, impulse)
        _apply_impulse(bodies, inv_inertia_w, b, r_b, -impulse)
        contacts.patch_tangential[:, p] += impulse
        group_impulse[g.name] += impulse

        # torsional patch friction: a finite contact area also resists spin
        # about the patch normal, with lever arm = the member spread radius
        spread = np.sqrt(
            (w * np.sum((contacts.pos[:, sl] - centroid[:, None]) ** 2, axis=2)
             ).sum(axis=1) / w_sum[:, 0])
        w_rel = (bodies.angvel[:, a] if a >= 0 else 0.0) - (
            bodies.angvel[:, b] if b >= 0 else 0.0)
        w_n = np.einsum("ej,ej->e", n_bar, np.atleast_2d(w_rel))
        spinning = act & (np.abs(w_n) > 1e-8) & (spread > 1e-9)
        if spinning.any():
            inv_i = np.zeros(bodies.num_envs)
            for bi in (a, b):
                if bi >= 0:
                    inv_i = inv_i + np.einsum(
                        "ej,ejk,ek->e", n_bar, inv_inertia_w[:, bi], n_bar)
            i_eff = 1.0 / np.maximum(inv_i, 1e-12)
            t_mag = np.minimum(i_eff * np.abs(w_n), mu * lam_n * spread)
            ang_imp = np.where(spinning[:, None],
                               -np.sign(w_n)[:, None] * t_mag[:, None] * n_bar, 0.0)
            if a >= 0:
                bodies.angvel[:, a] += np.einsum(
                    "eij,ej->ei", inv_inertia_w[:, a], ang_imp)
            if b >= 0:
                bodies.angvel[:, b] -= np.einsum(
                    "eij,ej->ei", inv_inertia_w[:, b], ang_imp)


def _integrate(bodies, contacts, h):
    bodies.pos += h * bodies.linvel
    spinning = np.any(bodies.angvel != 0.0, axis=-1)
    if spinning.any():
        bodies.quat = quat_integrate(bodies.quat, bodies.angvel, h)
    # Track end-of-substep penetration: eps+ = eps + h * eps_dot+.
    if contacts.count:
        eps_dot = contacts.relative_normal_speed(bodies)
        contacts.eps += np.where(contacts.active, h * eps_dot, 0.0)


def _check_finite(bodies, contacts):
    if np.isfinite(bodies.linvel).all() and np.isfinite(bodies.angvel).all():
        return
    bad_env = int(np.argmax(~np.isfinite(bodies.linvel).all(axis=(1, 2))))
    bad_c = None
    if contacts.count:
        bad = ~np.isfinite(contacts.lam)
        if bad.any():
            bad_c = int(np.argmax(bad.any(axis=0)))
    raise SolverDiverged(
        f"non-finite velocity in env {bad_env}", constraint_index=bad_c, env_index=bad_env
    )
