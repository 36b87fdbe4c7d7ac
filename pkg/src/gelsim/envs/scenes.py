"""Canonical benchmark scenes: static shape sensing and ball rolling.

Both scenes position the sensor pad face-up in the world (+z normal), so
sensor-frame and world-frame axes coincide for easy analysis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import build_sdf, make_icosphere
from ..geometry.sdf import SdfGrid
from ..physics.bodies import BodyBatch, RigidBodyState, solid_sphere_inertia
from ..physics.contacts import ContactGroup, generate_contacts
from ..physics.solver import SoftContactParams, SolverConfig, solver_step
from ..render.camera import camera_for_sensor, reference_depth
from ..render.depth import render_depth
from ..render.lut import depth_to_rgb, synthetic_lut
from ..sensors import TactileSensorSpec
from ..tactile.field import ForceField, PenaltyParams, compute_force_field
from ..tactile.points import TactilePointGrid, sample_tactile_points
from ..transforms import IDENTITY_QUAT, quat_conj, quat_mul, quat_rotate_inv
from .peg_tasks import halfspace_grid


def shape_sensing_scene(object_sdf: SdfGrid, press_pos, press_quat=IDENTITY_QUAT,
                        sensor: TactileSensorSpec | None = None,
                        penalty: PenaltyParams | None = None,
                        ff_grid=(10, 14), num_envs: int = 1):
    """Static press of an object against the sensor at a given pose.

    press_pos/press_quat: object pose in the sensor frame (z up out of the
    gel), optionally batched (E, ...).  Returns (rgb image, ForceField);
    batched inputs give leading env axes on both.
    """
    sensor = sensor or TactileSensorSpec()
    penalty = penalty or PenaltyParams()
    camera = camera_for_sensor(sensor)
    background = reference_depth(camera, sensor)
    lut = synthetic_lut(sensor.image_size)
    press_pos = np.asarray(press_pos, dtype=np.float64)
    press_quat = np.asarray(press_quat, dtype=np.float64)
    if press_pos.ndim == 1 and num_envs > 1:
        press_pos = np.tile(press_pos, (num_envs, 1))
        press_quat = np.tile(press_quat, (num_envs, 1))

    depth = render_depth(camera, object_sdf, press_pos, press_quat, background)
    rgb = depth_to_rgb(depth, lut)

    grid = sample_tactile_points(sensor, *ff_grid)
    zeros = np.zeros_like(press_pos)
    fld = compute_force_field(
        grid, object_sdf, press_pos, press_quat, zeros, zeros,
        np.zeros(3), IDENTITY_QUAT, np.zeros(3), np.zeros(3), penalty)
    return rgb, fld


@dataclass
class BallRollingConfig:
    num_envs: int = 1
    seed: int = 0
    ball_radius: float = 0.005
    ball_mass: float = 0.01
    press_depth: float = 0.0008       # sensor pressed into the ball
    drag_velocity: tuple = (0.02, 0.0, 0.0)
    frames: int = 60
    settle_frames: int = 20
    ff_grid: tuple = (10, 14)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(substeps=2, mode="grouped"))
    contact: SoftContactParams = field(default_factory=lambda: SoftContactParams(
        kappa=300.0, c=1.0, mu=1.5))
    penalty: PenaltyParams = field(default_factory=PenaltyParams)


class BallRollingScene:
    """A face-down sensor pad presses a ball against the ground and drags it.

    The pad is a kinematic body with prescribed velocity; the ball responds
    through the soft contacts.  Per-frame force fields are recorded.
    """

    def __init__(self, cfg: BallRollingConfig, sensor: TactileSensorSpec | None = None):
        self.cfg = cfg
        self.sensor = sensor or TactileSensorSpec()
        self.ball_sdf = build_sdf(make_icosphere(cfg.ball_radius, 3),
                                  dims=(40, 40, 40), padding=0.003)
        self.table_sdf = halfspace_grid()
        self.ff_points = sample_tactile_points(self.sensor, *cfg.ff_grid)

        E = cfg.num_envs
        r = cfg.ball_radius
        # pad face-down at z = 2r - press_depth, its +z (outward normal)
        # pointing down at the ball; sensor frame rotated pi about x
        self.pad_quat = np.array([0.0, 1.0, 0.0, 0.0])  # 180 deg about x
        pad = RigidBodyState(pos=[0, 0, 2 * r - cfg.press_depth],
                             quat=self.pad_quat, static=True)
        ball = RigidBodyState(pos=[0, 0, r], mass=cfg.ball_mass,
                              inertia=solid_sphere_inertia(cfg.ball_mass, r))
        table = RigidBodyState(static=True)
        self.bodies = BodyBatch([pad, ball, table], E)
        # pad collision points: the tactile grid itself, in pad local frame
        pad_pts = self.ff_points.flat()
        self.groups = [
            ContactGroup("pad-ball", 0, 1, pad_pts, self.ball_sdf,
                         max_patches=4, margin=0.002, mu=cfg.contact.mu),
            ContactGroup("ball-table", 1, 2,
                         np.array([[0.0, 0.0, -r]]), self.table_sdf,
                         max_patches=1, margin=0.002),
        ]

    def run(self):
        """Simulate settle + drag; returns list of per-frame ForceFields."""
        cfg = self.cfg
        fields = []
        kinematics = []
        for frame in range(cfg.settle_frames + cfg.frames):
            dragging = frame >= cfg.settle_frames
            v = np.asarray(cfg.drag_velocity) if dragging else np.zeros(3)
            self.bodies.linvel[:, 0] = v
            contacts = generate_contacts(self.bodies, self.groups, cfg.contact)
            solver_step(self.bodies, contacts, cfg.solver, cfg.contact)
            fld, kin = self._force_field()
            fld.frame_index = frame
            fields.append(fld)
            kinematics.append(kin)
        return fields, kinematics

    def _force_field(self):
        pad_pos = self.bodies.pos[:, 0]
        pad_quat = self.bodies.quat[:, 0]
        return compute_force_field(
            self.ff_points, self.ball_sdf,
            self.bodies.pos[:, 1], self.bodies.quat[:, 1],
            self.bodies.linvel[:, 1], self.bodies.angvel[:, 1],
            pad_pos, pad_quat, self.bodies.linvel[:, 0], self.bodies.angvel[:, 0],
            self.cfg.penalty, return_kinematics=True)


def ball_rolling_scene(cfg: BallRollingConfig | None = None):
    """Convenience wrapper returning the recorded force-field trajectory."""
    cfg = cfg or BallRollingConfig()
    scene = BallRollingScene(cfg)
    fields, _ = scene.run()
    return fields
