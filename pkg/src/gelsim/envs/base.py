"""Environment configuration and step containers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..physics.solver import SoftContactParams, SolverConfig
from ..render.augment import AugmentConfig
from ..tactile.field import PenaltyParams
from .randomize import RandomizationBounds

MODALITIES = ("privileged", "reduced", "tactile_img", "tactile_ff", "wrist_img")

ACTION_POS_LIMIT = 0.01   # m per step, each axis
ACTION_ROT_LIMIT = 0.05   # rad per step, each axis

PRIVILEGED_DIM = 37
REDUCED_DIM = 15


@dataclass
class EnvConfig:
    task: str = "insertion"            # insertion | placement
    num_envs: int = 4
    seed: int = 0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(substeps=2, mode="grouped"))
    contact: SoftContactParams = field(default_factory=SoftContactParams)
    penalty: PenaltyParams = field(default_factory=PenaltyParams)
    bounds: RandomizationBounds = field(default_factory=RandomizationBounds)
    obs_modalities: tuple = ("reduced",)
    tactile_image_size: tuple = (80, 60)   # W, H
    tactile_ff_grid: tuple = (10, 14)      # rows, cols
    tactile_rep: str = "color"             # color | diff | concat
    augment: AugmentConfig | None = None
    max_episode_steps: int = 64
    # assets (desk scale)
    peg_radius: float = 0.008
    peg_length: float = 0.05
    peg_mass: float = 0.03
    socket_clearance: float = 0.002
    socket_depth: float = 0.015
    socket_chamfer: float = 0.003
    grip_squeeze: float = 0.0025
    grip_mu: float = 2.0
    socket_mu: float = 0.4
    table_mu: float = 0.6
    # success tolerances
    insertion_depth_fraction: float = 0.75
    max_tilt_deg: float = 5.0
    placement_hold_frames: int = 15        # 0.25 s at 60 Hz

    def __post_init__(self):
        for m in self.obs_modalities:
            if m not in MODALITIES:
                raise ValueError(f"unknown modality {m!r}")
        if self.task not in ("insertion", "placement"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.tactile_rep not in ("color", "diff", "concat"):
            raise ValueError(f"unknown tactile representation {self.tactile_rep!r}")


@dataclass
class StepResult:
    obs: dict
    priv: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    success: np.ndarray
    info: dict


def clamp_action(actions: np.ndarray) -> np.ndarray:
    a = np.asarray(actions, dtype=np.float64).reshape(-1, 6).copy()
    a[:, :3] = np.clip(a[:, :3], -ACTION_POS_LIMIT, ACTION_POS_LIMIT)
    a[:, 3:] = np.clip(a[:, 3:], -ACTION_ROT_LIMIT, ACTION_ROT_LIMIT)
    return a


# Desk-scale randomization: tilts stay inside the range a fixed-width grip
# can hold by wedging (a real force-controlled gripper re-closes on the peg
# continuously; these pads are rigid after the grasp), and travel distances
# shrink so episodes fit in a few dozen steps.
DESK_BOUNDS = {
    "ee_z": (0.08, 0.12),
    "ee_euler_x": (np.pi - 0.05, np.pi + 0.05),
    "ee_euler_y": (-0.05, 0.05),
    "ee_euler_z": (-0.5, 0.5),
    "socket_z": (0.0, 0.005),
    "peg_grip_z": (-0.008, 0.008),
    "peg_grip_xrot": (-0.15, 0.15),
}


def desk_insertion_config(num_envs=64, seed=0, **overrides) -> "EnvConfig":
    from .randomize import RandomizationBounds

    bounds = RandomizationBounds().override(**DESK_BOUNDS)
    kwargs = dict(task="insertion", num_envs=num_envs, seed=seed, bounds=bounds,
                  tactile_image_size=(40, 30), max_episode_steps=32)
    kwargs.update(overrides)
    return EnvConfig(**kwargs)


def desk_placement_config(num_envs=64, seed=0, **overrides) -> "EnvConfig":
    from .randomize import RandomizationBounds

    bounds = RandomizationBounds().override(**DESK_BOUNDS)
    kwargs = dict(task="placement", num_envs=num_envs, seed=seed, bounds=bounds,
                  tactile_image_size=(40, 30), max_episode_steps=32)
    kwargs.update(overrides)
    return EnvConfig(**kwargs)
