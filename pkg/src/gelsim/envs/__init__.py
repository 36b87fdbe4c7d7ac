from .base import (
    ACTION_POS_LIMIT,
    ACTION_ROT_LIMIT,
    EnvConfig,
    StepResult,
    clamp_action,
    desk_insertion_config,
    desk_placement_config,
)
from .control import ImpedanceGains, impedance_wrench, orientation_error
from .dataset import TrajectoryReader, TrajectoryWriter
from .peg_tasks import PegEnvBatch, halfspace_grid
from .randomize import DEFAULT_BOUNDS, RandomizationBounds
from .scenes import (
    BallRollingConfig,
    BallRollingScene,
    ball_rolling_scene,
    shape_sensing_scene,
)

__all__ = [
    "ACTION_POS_LIMIT", "ACTION_ROT_LIMIT", "EnvConfig", "StepResult",
    "clamp_action", "desk_insertion_config", "desk_placement_config",
    "ImpedanceGains", "impedance_wrench", "orientation_error",
    "TrajectoryReader", "TrajectoryWriter", "PegEnvBatch", "halfspace_grid",
    "DEFAULT_BOUNDS", "RandomizationBounds", "BallRollingConfig",
    "BallRollingScene", "ball_rolling_scene", "shape_sensing_scene",
]
