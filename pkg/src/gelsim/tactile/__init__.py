from .field import (
    ForceField,
    PenaltyParams,
    compute_force_field,
    net_wrench,
    penalty_forces,
)
from .io import read_force_field_frames, shear_map_image, write_force_field_frames
from .points import TactilePointGrid, sample_tactile_points

__all__ = [
    "ForceField", "PenaltyParams", "compute_force_field", "net_wrench",
    "penalty_forces", "read_force_field_frames", "shear_map_image",
    "write_force_field_frames", "TactilePointGrid", "sample_tactile_points",
]
