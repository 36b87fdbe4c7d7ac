"""Environment randomization bounds, uniformly sampled per episode."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidRange

# Full-scale defaults; desk-scale task configs narrow several of these.
DEFAULT_BOUNDS = {
    "ee_x": (0.4, 0.6),
    "ee_y": (-0.1, 0.1),
    "ee_z": (0.1, 0.2),
    "ee_euler_x": (3.04, 3.24),
    "ee_euler_y": (-0.1, 0.1),
    "ee_euler_z": (-1.0, 1.0),
    "socket_x": (0.4, 0.6),
    "socket_y": (-0.1, 0.1),
    "socket_z": (0.0, 0.02),
    "peg_grip_z": (-0.0125, 0.0125),
    "peg_grip_xrot": (-0.628, 0.628),
    "socket_obs_noise": (-0.005, 0.005),
    "kappa": (150.0, 350.0),
    "damping_c": (0.0, 1.0),
    "joint_damping": (-1.5, 1.5),
}


@dataclass
class RandomizationBounds:
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))

    def __post_init__(self):
        for key, (lo, hi) in self.bounds.items():
            if hi < lo:
                raise InvalidRange(f"{key}: [{lo}, {hi}]")

    def override(self, **kwargs) -> "RandomizationBounds":
        merged = dict(self.bounds)
        merged.update(kwargs)
        return RandomizationBounds(merged)

    def sample(self, rng: np.random.Generator) -> dict:
        """One uniform draw per parameter, in declaration order."""
        return {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in self.bounds.items()}
