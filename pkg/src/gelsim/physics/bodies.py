"""Rigid-body state, single and batched over environments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..transforms import quat_normalize, quat_to_mat

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass
class RigidBodyState:
    """One rigid body: pose, twist, and inertial properties.

    Static and kinematic bodies carry inv_mass = 0; kinematic ones may still
    have a prescribed velocity, which the integrator honors.
    """

    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quat: np.ndarray = field(default_factory=lambda: IDENTITY.copy())
    linvel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angvel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float = 1.0
    inertia: np.ndarray = field(default_factory=lambda: np.eye(3))
    static: bool = False

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        self.quat = quat_normalize(np.asarray(self.quat, dtype=np.float64))
        self.linvel = np.asarray(self.linvel, dtype=np.float64)
        self.angvel = np.asarray(self.angvel, dtype=np.float64)
        self.inertia = np.asarray(self.inertia, dtype=np.float64)
        eig = np.linalg.eigvalsh(self.inertia)
        if eig.min() < -1e-12:
            raise ValueError("inertia must be positive semidefinite")

    @property
    def inv_mass(self) -> float:
        return 0.0 if self.static or self.mass == 0 else 1.0 / self.mass

    @property
    def inv_inertia(self) -> np.ndarray:
        if self.static:
            return np.zeros((3, 3))
        return np.linalg.inv(self.inertia)


def solid_cylinder_inertia(mass, radius, height):
    ixx = mass * (3 * radius**2 + height**2) / 12.0
    izz = mass * radius**2 / 2.0
    return np.diag([ixx, ixx, izz])


def solid_sphere_inertia(mass, radius):
    return np.eye(3) * (0.4 * mass * radius**2)


def solid_box_inertia(mass, size):
    sx, sy, sz = size
    return np.diag(
        [
            mass * (sy**2 + sz**2) / 12.0,
            mass * (sx**2 + sz**2) / 12.0,
            mass * (sx**2 + sy**2) / 12.0,
        ]
    )


class BodyBatch:
    """Struct-of-arrays body states for E environments x B bodies.

    All arrays are (E, B, ...) float64.  Environments evolve independently;
    no operation mixes data across the leading axis.
    """

    def __init__(self, bodies: list[RigidBodyState], num_envs: int):
        B = len(bodies)
        E = num_envs
        self.num_envs = E
        self.num_bodies = B
        self.names = []
        self.pos = np.zeros((E, B, 3))
        self.quat = np.zeros((E, B, 4))
        self.linvel = np.zeros((E, B, 3))
        self.angvel = np.zeros((E, B, 3))
        self.inv_mass = np.zeros((E, B))
        self.inv_inertia_local = np.zeros((E, B, 3, 3))
        for i, b in enumerate(bodies):
            self.pos[:, i] = b.pos
            self.quat[:, i] = b.quat
            self.linvel[:, i] = b.linvel
            self.angvel[:, i] = b.angvel
            self.inv_mass[:, i] = b.inv_mass
            self.inv_inertia_local[:, i] = b.inv_inertia

    def world_inv_inertia(self) -> np.ndarray:
        """(E, B, 3, 3) inverse inertia rotated into the world frame."""
        R = quat_to_mat(self.quat)
        return R @ self.inv_inertia_local @ np.swapaxes(R, -1, -2)

    def copy(self) -> "BodyBatch":
        out = object.__new__(BodyBatch)
        out.num_envs = self.num_envs
        out.num_bodies = self.num_bodies
        out.names = list(self.names)
        for name in ("pos", "quat", "linvel", "angvel", "inv_mass", "inv_inertia_local"):
            setattr(out, name, getattr(self, name).copy())
        return out
