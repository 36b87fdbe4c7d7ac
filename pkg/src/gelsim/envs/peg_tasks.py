"""Batched peg placement / insertion environments.

Scene per env: a free-floating gripper body (impedance-driven, two gel pads
facing each other across the grip axis) holding a cylindrical peg by soft
contact friction alone, above a table carrying either a socket (insertion)
or a flat target pad region (placement).  All envs share geometry; poses,
grip offsets, soft-contact parameters, and observation noise are sampled
per episode.
"""
from __future__ import annotations

import numpy as np

from ..geometry import build_sdf, make_cylinder, make_socket
from ..geometry.sdf import SdfGrid
from ..physics.bodies import BodyBatch, RigidBodyState, solid_cylinder_inertia
from ..physics.contacts import ContactGroup, generate_contacts
from ..physics.solver import SoftContactParams, solver_step
from ..render.augment import augment
from ..render.camera import camera_for_sensor, reference_depth
from ..render.depth import render_depth
from ..render.lut import depth_to_rgb, synthetic_lut
from ..sensors import TactileSensorSpec
from ..tactile.field import compute_force_field
from ..tactile.points import sample_tactile_points
from ..transforms import (
    quat_conj,
    quat_from_axis_angle,
    quat_from_euler_xyz,
    quat_mul,
    quat_rotate,
    quat_rotate_inv,
)
from . import rng as rngmod
from .base import EnvConfig, StepResult, clamp_action
from .control import ImpedanceGains, impedance_wrench

EE, PEG, SOCKET, TABLE = 0, 1, 2, 3

KEYPOINT_FRACTIONS = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)  # tip .. head
KEYPOINT_HALF_SATURATION = 0.01   # m
ACTION_PENALTY = 0.01
CONTACT_PENALTY = 0.02            # per newton on the peg from socket+table
CONTACT_PENALTY_CAP = 0.5


def halfspace_grid(extent=2.0, cells=9) -> SdfGrid:
    """Analytic SDF of the table halfspace z <= 0 (exact under trilinear)."""
    half = extent / 2.0
    spacing = extent / (cells - 1)
    zs = np.linspace(-half, half, cells)
    values = np.broadcast_to(zs[None, None, :], (cells, cells, cells)).copy()
    grads = np.zeros((cells, cells, cells, 3))
    grads[..., 2] = 1.0
    return SdfGrid(origin=np.array([-half, -half, -half]), spacing=spacing,
                   dims=(cells, cells, cells), values=values, gradients=grads)


def _pad_collision_points(area, nx=5, ny=4):
    xs = np.linspace(-area[0] / 2, area[0] / 2, nx)
    ys = np.linspace(-area[1] / 2, area[1] / 2, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.stack([gx, gy, np.zeros_like(gx)], axis=-1).reshape(-1, 3)


def _peg_shell_points(radius, length, rings=(0.0, 0.005, 0.01), n=(12, 8, 8)):
    """Contact samples on the peg surface.

    Peg local frame: axis +z.  The gripper holds the peg with local +z
    pointing at the table (flipped tool frame), so the +z end gets the dense
    rim rings; the -z end keeps a sparse ring for tip-overs.
    """
    def ring(r, z, count):
        a = np.arange(count) * (2 * np.pi / count)
        return np.stack([r * np.cos(a), r * np.sin(a), np.full(count, z)], axis=1)

    pts = [np.array([[0.0, 0.0, length / 2]])]
    for height, count in zip(rings, n):
        pts.append(ring(radius, length / 2 - height, count))
    pts.append(np.array([[0.0, 0.0, -length / 2]]))
    pts.append(ring(radius, -length / 2, 8))
    return np.concatenate(pts)


class PegEnvBatch:
    """Lockstep batch of peg-task environments."""

    def __init__(self, config: EnvConfig):
        self.cfg = config
        self.num_envs = config.num_envs
        E = self.num_envs
        c = config

        peg_mesh = make_cylinder(c.peg_radius, c.peg_length, segments=32)
        self.peg_sdf = build_sdf(peg_mesh, dims=(32, 32, 64), padding=0.004)
        bore_r = c.peg_radius + c.socket_clearance
        if c.task == "insertion":
            socket_mesh = make_socket(bore_r, c.socket_depth, outer_radius=0.024,
                                      chamfer_width=c.socket_chamfer,
                                      chamfer_depth=c.socket_chamfer)
            self.socket_sdf = build_sdf(socket_mesh, dims=(56, 56, 40), padding=0.004)
        else:
            self.socket_sdf = None  # placement target is a flat region of the table
        self.table_sdf = halfspace_grid()

        W, H = c.tactile_image_size
        self.sensor = TactileSensorSpec(image_size=(W, H))
        self.camera = camera_for_sensor(self.sensor)
        self.background = reference_depth(self.camera, self.sensor)
        self.lut = synthetic_lut((W, H))
        self.nominal_rgb = np.broadcast_to(
            self.lut.background_color.astype(np.float32), (H, W, 3)).copy()
        self.ff_grid = sample_tactile_points(self.sensor, *c.tactile_ff_grid)

        # gripper: pads face each other along ee-local y, peg axis along local z
        self.pad_area = self.sensor.active_area
        self.grip_center_local = np.array([0.0, 0.0, 0.06])  # below the ee origin
        # sensor A local: +y side, its +z (pad normal) pointing -y (inward)
        self.quat_pad_a = quat_from_axis_angle(np.array([1.0, 0, 0]), np.pi / 2)
        # sensor B local: -y side, pad normal pointing +y
        self.quat_pad_b = quat_from_axis_angle(np.array([1.0, 0, 0]), -np.pi / 2)

        pad_pts = _pad_collision_points(self.pad_area, nx=7, ny=4)
        self.pad_pts_a = np.zeros((E, len(pad_pts), 3))
        self.pad_pts_b = np.zeros((E, len(pad_pts), 3))
        self._pad_pts_template = pad_pts
        peg_pts = _peg_shell_points(c.peg_radius, c.peg_length)

        bodies = [
            RigidBodyState(mass=0.5, inertia=np.eye(3) * 2e-3),            # ee
            RigidBodyState(mass=c.peg_mass,
                           inertia=solid_cylinder_inertia(c.peg_mass, c.peg_radius,
                                                          c.peg_length)),   # peg
            RigidBodyState(static=True),                                    # socket
            RigidBodyState(static=True),                                    # table
        ]
        self.bodies = BodyBatch(bodies, E)

        self.groups = [
            ContactGroup("pad_a-peg", EE, PEG, self.pad_pts_a, self.peg_sdf,
                         max_patches=4, margin=0.002, mu=c.grip_mu),
            ContactGroup("pad_b-peg", EE, PEG, self.pad_pts_b, self.peg_sdf,
                         max_patches=4, margin=0.002, mu=c.grip_mu),
            ContactGroup("peg-table", PEG, TABLE, peg_pts, self.table_sdf,
                         max_patches=1, margin=0.002, mu=c.table_mu),
        ]
        if c.task == "insertion":
            self.groups.insert(2, ContactGroup("peg-socket", PEG, SOCKET, peg_pts,
                                               self.socket_sdf, max_patches=2,
                                               margin=0.002, mu=c.socket_mu))

        self.gains = ImpedanceGains()
        self.params = SoftContactParams(kappa=np.full(E, 200.0), c=np.full(E, 0.5),
                                        mu=2.0)
        self.kd_jitter = np.zeros(E)
        self.gripper_width = np.zeros(E)
        self.socket_obs_noise = np.zeros((E, 3))
        self.target_pos = np.zeros((E, 3))
        self.target_quat = np.tile([1.0, 0, 0, 0], (E, 1))
        self.episode = np.zeros(E, dtype=np.int64)
        self.step_count = np.zeros(E, dtype=np.int64)
        self.success_latch = np.zeros(E, dtype=bool)
        self.hold_counter = np.zeros(E, dtype=np.int64)
        self.env_seeds = np.arange(E, dtype=np.int64) + config.seed
        self.frame = 0
        self.last_group_forces = {g.name: np.zeros((E, 3)) for g in self.groups}

    # ------------------------------------------------------------------
    # reset
    # ------------------------------------------------------------------

    def reset(self, seeds=None):
        if seeds is not None:
            self.env_seeds = np.asarray(seeds, dtype=np.int64).copy()
            self.episode[:] = 0
        self._reset_envs(np.ones(self.num_envs, dtype=bool))
        return self._observe()

    def _reset_envs(self, mask: np.ndarray):
        c = self.cfg
        for e in np.nonzero(mask)[0]:
            r = rngmod.stream(self.env_seeds[e], rngmod.EPISODE_INIT, self.episode[e])
            s = c.bounds.sample(r)

            ee_pos = np.array([s["ee_x"], s["ee_y"], s["ee_z"]])
            ee_quat = quat_from_euler_xyz(s["ee_euler_x"], s["ee_euler_y"],
                                          s["ee_euler_z"])
            self.bodies.pos[e, EE] = ee_pos
            self.bodies.quat[e, EE] = ee_quat
            self.bodies.linvel[e, EE] = 0.0
            self.bodies.angvel[e, EE] = 0.0
            self.target_pos[e] = ee_pos
            self.target_quat[e] = ee_quat

            socket_pos = np.array([s["socket_x"], s["socket_y"], s["socket_z"]])
            self.bodies.pos[e, SOCKET] = socket_pos
            self.bodies.quat[e, SOCKET] = [1, 0, 0, 0]
            self.bodies.pos[e, TABLE] = 0.0
            self.bodies.quat[e, TABLE] = [1, 0, 0, 0]

            # peg in gripper: offset along the grip axis + tilt about local x
            grip_local = self.grip_center_local
            peg_local_pos = grip_local + np.array([0.0, 0.0, s["peg_grip_z"]])
            peg_local_quat = quat_from_axis_angle(np.array([1.0, 0, 0]),
                                                  s["peg_grip_xrot"])
            peg_quat = quat_mul(ee_quat, peg_local_quat)
            peg_pos = ee_pos + quat_rotate(ee_quat, peg_local_pos)
            self.bodies.pos[e, PEG] = peg_pos
            self.bodies.quat[e, PEG] = peg_quat
            self.bodies.linvel[e, PEG] = 0.0
            self.bodies.angvel[e, PEG] = 0.0

            # force-closed grip: widen the pads until the deepest sample point
            # penetrates by exactly the configured squeeze
            self.gripper_width[e] = 2 * self._fit_grip(e, peg_local_pos, peg_local_quat)

            self.params.kappa[e] = s["kappa"]
            self.params.c[e] = s["damping_c"]
            self.kd_jitter[e] = s["joint_damping"]
            noise_r = rngmod.stream(self.env_seeds[e], rngmod.OBS_NOISE, self.episode[e])
            self.socket_obs_noise[e] = noise_r.uniform(
                *c.bounds.bounds["socket_obs_noise"], size=3)

            self.step_count[e] = 0
            self.success_latch[e] = False
            self.hold_counter[e] = 0

    def _fit_grip(self, e, peg_local_pos, peg_local_quat):
        """Place each pad so its deepest sample penetrates by grip_squeeze.

        Emulates a force-controlled close: the pad plane slides along +-y
        until min SDF over its samples equals -squeeze.  Returns the half
        width per side summed (total gripper width).
        """
        from ..geometry.sdf import query_sdf

        c = self.cfg
        pts = self._pad_pts_template
        width = 0.0
        for sign, quat_pad, dest in ((+1, self.quat_pad_a, self.pad_pts_a),
                                     (-1, self.quat_pad_b, self.pad_pts_b)):
            base = quat_rotate(quat_pad, pts) + self.grip_center_local
            g = c.peg_radius + 0.002  # start clearly outside the peg
            # min SDF over samples is 1-Lipschitz in g: Newton with slope 1
            for _ in range(6):
                trial = base + np.array([0.0, sign * g, 0.0])
                p_peg = quat_rotate_inv(peg_local_quat, trial - peg_local_pos)
                q = query_sdf(self.peg_sdf, p_peg)
                d = float(np.min(np.where(q.valid, q.distance, np.inf)))
                err = d + c.grip_squeeze   # want d == -squeeze
                g = g - err
            dest[e] = base + np.array([0.0, sign * g, 0.0])
            width += abs(g)
        return width / 2.0

    # ------------------------------------------------------------------
    # step
    # ------------------------------------------------------------------

    def step(self, actions) -> StepResult:
        c = self.cfg
        E = self.num_envs
        a = clamp_action(actions)

        # actions move the persistent commanded target (pose deltas ride on
        # the previous target, so the impedance anchor cannot ratchet away)
        self.target_pos = self.target_pos + a[:, :3]
        angle = np.linalg.norm(a[:, 3:], axis=1)
        axis = np.where(angle[:, None] > 1e-12, a[:, 3:] / np.maximum(angle[:, None], 1e-12),
                        np.array([1.0, 0, 0]))
        dq = quat_from_axis_angle(axis, angle)
        self.target_quat = quat_mul(dq, self.target_quat)

        force, torque = impedance_wrench(
            self.target_pos, self.target_quat, self.bodies.pos[:, EE],
            self.bodies.quat[:, EE], self.bodies.linvel[:, EE],
            self.bodies.angvel[:, EE], self.gains, mass=0.5,
            kd_lin_jitter=self.kd_jitter)
        ext_force = np.zeros((E, self.bodies.num_bodies, 3))
        ext_torque = np.zeros((E, self.bodies.num_bodies, 3))
        ext_force[:, EE] = force
        ext_torque[:, EE] = torque

        contacts = generate_contacts(self.bodies, self.groups, self.params)
        _, group_forces = solver_step(self.bodies, contacts, c.solver, self.params,
                                      ext_force=ext_force, ext_torque=ext_torque)
        self.last_group_forces = group_forces
        self.frame += 1
        self.step_count += 1

        reward, info = self._reward(a, group_forces)
        success_now = self._success()
        self.success_latch |= success_now
        done = self.success_latch | (self.step_count >= c.max_episode_steps)
        reward = reward + np.where(success_now, 1.0, 0.0)  # terminal bonus

        result_success = self.success_latch.copy()
        if done.any():
            self.episode[done] += 1
            self._reset_envs(done)

        obs, priv = self._observe()
        return StepResult(obs=obs, priv=priv, reward=reward, done=done,
                          success=result_success, info=info)

    # ------------------------------------------------------------------
    # reward / success
    # ------------------------------------------------------------------

    def _peg_axis_and_tip(self):
        axis = quat_rotate(self.bodies.quat[:, PEG], np.array([0.0, 0, 1.0]))
        # tip = end of the peg closest to the table (world -z)
        half = self.cfg.peg_length / 2.0
        tip_down = self.bodies.pos[:, PEG] - axis * half
        tip_up = self.bodies.pos[:, PEG] + axis * half
        take_down = tip_down[:, 2] <= tip_up[:, 2]
        tip = np.where(take_down[:, None], tip_down, tip_up)
        up_axis = np.where(take_down[:, None], axis, -axis)  # tip -> head
        return up_axis, tip

    def _goal_tip(self):
        socket = self.bodies.pos[:, SOCKET]
        if self.cfg.task == "insertion":
            seat = self.cfg.socket_depth - 0.002
            return socket + np.array([0.0, 0.0, -seat])
        return socket  # placement: tip on the target point of the table

    def _keypoints(self, tip, up_axis):
        fr = np.array(KEYPOINT_FRACTIONS) * self.cfg.peg_length
        return tip[:, None, :] + up_axis[:, None, :] * fr[None, :, None]

    def _reward(self, actions, group_forces):
        up_axis, tip = self._peg_axis_and_tip()
        goal_tip = self._goal_tip()
        goal_axis = np.array([0.0, 0.0, 1.0])
        kp = self._keypoints(tip, up_axis)
        goal_kp = goal_tip[:, None, :] + goal_axis[None, None, :] * (
            np.array(KEYPOINT_FRACTIONS) * self.cfg.peg_length)[None, :, None]
        d = np.linalg.norm(kp - goal_kp, axis=2)
        r_keypoint = np.mean(KEYPOINT_HALF_SATURATION / (KEYPOINT_HALF_SATURATION + d),
                             axis=1)

        r_action = ACTION_PENALTY * (
            np.sum((actions[:, :3] / 0.01) ** 2, axis=1)
            + np.sum((actions[:, 3:] / 0.05) ** 2, axis=1)) / 6.0

        f_env = group_forces.get("peg-table", 0.0)
        if "peg-socket" in group_forces:
            f_env = f_env + group_forces["peg-socket"]
        # forces reported on the point-carrying body (the peg) by the world
        f_mag = np.linalg.norm(np.atleast_2d(f_env), axis=-1)
        r_contact = np.minimum(CONTACT_PENALTY * f_mag, CONTACT_PENALTY_CAP)

        reward = r_keypoint - r_action - r_contact
        info = {"r_keypoint": r_keypoint, "r_action": r_action,
                "r_contact": r_contact}
        return reward, info

    def _success(self):
        c = self.cfg
        up_axis, tip = self._peg_axis_and_tip()
        tilt = np.degrees(np.arccos(np.clip(up_axis[:, 2], -1.0, 1.0)))
        upright = tilt < c.max_tilt_deg
        if c.task == "insertion":
            socket_top = self.bodies.pos[:, SOCKET][:, 2]
            depth = socket_top - tip[:, 2]
            lateral = np.linalg.norm(tip[:, :2] - self.bodies.pos[:, SOCKET][:, :2],
                                     axis=1)
            inside = lateral < (c.peg_radius + c.socket_clearance)
            return upright & inside & (depth >= c.insertion_depth_fraction * c.socket_depth)
        # placement: upright, tip at the table, sustained contact, quiet peg
        near_table = tip[:, 2] < 0.003
        quiet = np.linalg.norm(self.bodies.linvel[:, PEG], axis=1) < 0.02
        touching = np.linalg.norm(self.last_group_forces["peg-table"], axis=1) > 1e-3
        holding = upright & near_table & quiet & touching
        self.hold_counter = np.where(holding, self.hold_counter + 1, 0)
        return self.hold_counter >= c.placement_hold_frames

    # ------------------------------------------------------------------
    # observations
    # ------------------------------------------------------------------

    def _sensor_world_pose(self, which):
        if which == 0:
            local_q = self.quat_pad_a
            pts = self.pad_pts_a
        else:
            local_q = self.quat_pad_b
            pts = self.pad_pts_b
        # pad origin = mean of its collision grid (center of the pad plane)
        local_p = pts.mean(axis=1)
        pos = self.bodies.pos[:, EE] + quat_rotate(self.bodies.quat[:, EE], local_p)
        quat = quat_mul(self.bodies.quat[:, EE], local_q)
        return pos, quat

    def _sensor_world_velocity(self, pos):
        v = self.bodies.linvel[:, EE] + np.cross(
            self.bodies.angvel[:, EE], pos - self.bodies.pos[:, EE])
        return v, self.bodies.angvel[:, EE]

    def _privileged(self):
        E = self.num_envs
        out = np.zeros((E, 37))
        out[:, 0:3] = self.bodies.pos[:, EE]
        out[:, 3:7] = self.bodies.quat[:, EE]
        out[:, 7:10] = self.bodies.linvel[:, EE]
        out[:, 10:13] = self.bodies.angvel[:, EE]
        out[:, 13] = self.gripper_width
        out[:, 14:17] = self.bodies.pos[:, SOCKET]
        out[:, 17:21] = self.bodies.quat[:, SOCKET]
        out[:, 21:24] = self.bodies.pos[:, PEG]
        out[:, 24:28] = self.bodies.quat[:, PEG]
        f_socket = self.last_group_forces.get("peg-socket")
        if f_socket is None:
            f_socket = self.last_group_forces["peg-table"]
        else:
            f_socket = f_socket + self.last_group_forces["peg-table"]
        out[:, 28:31] = f_socket
        # finger forces are reported on the pads (body_a = ee side)
        out[:, 31:34] = -self.last_group_forces["pad_a-peg"]
        out[:, 34:37] = -self.last_group_forces["pad_b-peg"]
        return out

    def _reduced(self):
        E = self.num_envs
        out = np.zeros((E, 15))
        out[:, 0:3] = self.bodies.pos[:, EE]
        out[:, 3:7] = self.bodies.quat[:, EE]
        out[:, 7] = self.gripper_width
        out[:, 8:11] = self.bodies.pos[:, SOCKET] + self.socket_obs_noise
        out[:, 11:15] = self.bodies.quat[:, SOCKET]
        return out

    def _tactile_images(self):
        c = self.cfg
        W, H = c.tactile_image_size
        E = self.num_envs
        imgs = np.zeros((E, 2, H, W, 3), dtype=np.float32)
        for s_idx in range(2):
            pos, quat = self._sensor_world_pose(s_idx)
            rel_pos = quat_rotate_inv(quat, self.bodies.pos[:, PEG] - pos)
            rel_quat = quat_mul(quat_conj(quat), self.bodies.quat[:, PEG])
            depth = render_depth(self.camera, self.peg_sdf, rel_pos, rel_quat,
                                 self.background)
            rgb = depth_to_rgb(depth, self.lut).astype(np.float32)
            imgs[:, s_idx] = rgb
        if c.augment is not None:
            for e in range(E):
                ep_seed = int(self.env_seeds[e] * 1000003 + self.episode[e])
                step = int(self.step_count[e])
                for s_idx in range(2):
                    imgs[e, s_idx] = augment(imgs[e, s_idx], c.augment, ep_seed, step)
        if c.tactile_rep == "diff":
            imgs = imgs - self.nominal_rgb[None, None]
        elif c.tactile_rep == "concat":
            nominal = np.broadcast_to(self.nominal_rgb, imgs.shape[2:])
            imgs = np.concatenate(
                [imgs, np.broadcast_to(nominal, imgs.shape)], axis=-1)
        return imgs

    def _tactile_ff(self):
        c = self.cfg
        E = self.num_envs
        R, C = c.tactile_ff_grid
        out = np.zeros((E, 2, R, C, 3), dtype=np.float32)
        for s_idx in range(2):
            pos, quat = self._sensor_world_pose(s_idx)
            v, w = self._sensor_world_velocity(pos)
            fld = compute_force_field(
                self.ff_grid, self.peg_sdf,
                self.bodies.pos[:, PEG], self.bodies.quat[:, PEG],
                self.bodies.linvel[:, PEG], self.bodies.angvel[:, PEG],
                pos, quat, v, w, c.penalty)
            out[:, s_idx, ..., 0] = fld.f_n[..., 2]
            out[:, s_idx, ..., 1] = fld.f_t[..., 0]
            out[:, s_idx, ..., 2] = fld.f_t[..., 1]
        return out

    def _observe(self):
        obs = {}
        priv = self._privileged()
        mods = self.cfg.obs_modalities
        if "privileged" in mods:
            obs["privileged"] = priv
        if "reduced" in mods:
            obs["reduced"] = self._reduced()
        if "tactile_img" in mods:
            obs["tactile_img"] = self._tactile_images()
        if "tactile_ff" in mods:
            obs["tactile_ff"] = self._tactile_ff()
        if "wrist_img" in mods:
            from .wrist import render_wrist

            obs["wrist_img"] = render_wrist(self)
        return obs, priv
