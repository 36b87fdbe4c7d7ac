from .augment import (
    AugmentConfig,
    augment,
    hsv_to_rgb,
    rgb_to_hsv,
    sample_episode_transform,
)
from .camera import TactileCamera, camera_for_sensor, reference_depth
from .depth import DepthImage, render_depth
from .lut import (
    PolyLut,
    calibrate_lut,
    depth_gradients,
    depth_to_rgb,
    read_lut,
    synthetic_lut,
    write_lut,
)
from .imageio import load_png, load_raw_f32, save_png, save_raw_f32, to_uint8

__all__ = [
    "AugmentConfig", "augment", "hsv_to_rgb", "rgb_to_hsv",
    "sample_episode_transform", "TactileCamera", "camera_for_sensor",
    "reference_depth", "DepthImage", "render_depth", "PolyLut",
    "calibrate_lut", "depth_gradients", "depth_to_rgb", "read_lut",
    "synthetic_lut", "write_lut", "load_png", "load_raw_f32", "save_png",
    "save_raw_f32", "to_uint8",
]
