"""Tactile image augmentation: one transform per episode, reduced color
jitter per step, all deterministic in (config, episode seed, step index).

Fixed op order: spatial (zoom about center, then shift) -> channel
permutation -> brightness/contrast -> saturation/hue -> per-step jitter ->
clamp.  Color math runs at float32 so results are bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AugmentConfig:
    """Per-episode ranges with optional reduced per-step color ranges.

    Per-step ranges must sit inside the episode ranges.  All deltas are
    symmetric: brightness 0.1 means an offset drawn from [-0.1, 0.1].
    """

    shift_px: float = 0.0
    zoom: tuple = (1.0, 1.0)
    brightness: float = 0.0
    contrast: tuple = (1.0, 1.0)
    saturation: tuple = (1.0, 1.0)
    hue: float = 0.0                 # fraction of the hue circle
    channel_permutation: bool = False
    step_brightness: float = 0.0
    step_contrast: tuple = (1.0, 1.0)
    step_saturation: tuple = (1.0, 1.0)
    step_hue: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.zoom[0] <= 0 or self.zoom[1] <= 0:
            raise ValueError("zoom must be positive")
        def width(rng):
            return max(abs(rng[0] - 1.0), abs(rng[1] - 1.0))
        if self.step_brightness > self.brightness + 1e-12:
            raise ValueError("per-step brightness exceeds episode range")
        if width(self.step_contrast) > width(self.contrast) + 1e-12:
            raise ValueError("per-step contrast exceeds episode range")
        if width(self.step_saturation) > width(self.saturation) + 1e-12:
            raise ValueError("per-step saturation exceeds episode range")
        if self.step_hue > self.hue + 1e-12:
            raise ValueError("per-step hue exceeds episode range")


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass
class EpisodeTransform:
    shift: tuple
    zoom: float
    brightness: float
    contrast: float
    saturation: float
    hue: float
    permutation: tuple


def sample_episode_transform(cfg: AugmentConfig, episode_seed: int) -> EpisodeTransform:
    rng = _rng(cfg.seed, int(episode_seed), 0)
    shift = tuple(rng.uniform(-cfg.shift_px, cfg.shift_px, size=2))
    zoom = float(rng.uniform(cfg.zoom[0], cfg.zoom[1]))
    brightness = float(rng.uniform(-cfg.brightness, cfg.brightness))
    contrast = float(rng.uniform(cfg.contrast[0], cfg.contrast[1]))
    saturation = float(rng.uniform(cfg.saturation[0], cfg.saturation[1]))
    hue = float(rng.uniform(-cfg.hue, cfg.hue))
    perm = tuple(rng.permutation(3)) if cfg.channel_permutation else (0, 1, 2)
    return EpisodeTransform(shift, zoom, brightness, contrast, saturation, hue, perm)


def _sample_step_jitter(cfg: AugmentConfig, episode_seed: int, step_index: int):
    rng = _rng(cfg.seed, int(episode_seed), 1, int(step_index))
    return (
        float(rng.uniform(-cfg.step_brightness, cfg.step_brightness)),
        float(rng.uniform(cfg.step_contrast[0], cfg.step_contrast[1])),
        float(rng.uniform(cfg.step_saturation[0], cfg.step_saturation[1])),
        float(rng.uniform(-cfg.step_hue, cfg.step_hue)),
    )


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone model: h in [0,1), s = (max-min)/max, v = max."""
    img = img.astype(np.float32)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    span = maxc - minc
    s = np.where(maxc > 0, span / np.maximum(maxc, np.float32(1e-12)), 0.0)
    safe = np.where(span > 0, span, np.float32(1.0))
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(span > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1).astype(np.float32)


def hsv_to_rgb(img: np.ndarray) -> np.ndarray:
    img = img.astype(np.float32)
    h, s, v = img[..., 0], img[..., 1], img[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1).astype(np.float32)


def _resample_bilinear(img: np.ndarray, zoom: float, shift):
    """Zoom about the image center then shift, edge-padded."""
    H, W = img.shape[:2]
    ys = (np.arange(H, dtype=np.float32) - (H - 1) / 2) / np.float32(zoom) \
        + np.float32((H - 1) / 2) - np.float32(shift[1])
    xs = (np.arange(W, dtype=np.float32) - (W - 1) / 2) / np.float32(zoom) \
        + np.float32((W - 1) / 2) - np.float32(shift[0])
    ys = np.clip(ys, 0, H - 1)
    xs = np.clip(xs, 0, W - 1)
    y0 = np.clip(ys.astype(np.int64), 0, H - 2)
    x0 = np.clip(xs.astype(np.int64), 0, W - 2)
    fy = (ys - y0).astype(np.float32)[:, None, None]
    fx = (xs - x0).astype(np.float32)[None, :, None]
    a = img[y0][:, x0]
    b = img[y0][:, x0 + 1]
    c = img[y0 + 1][:, x0]
    d = img[y0 + 1][:, x0 + 1]
    top = a * (1 - fx) + b * fx
    bot = c * (1 - fx) + d * fx
    return top * (1 - fy) + bot * fy


def _apply_color(img, brightness, contrast, saturation, hue):
    if contrast != 1.0:
        img = (img - np.float32(0.5)) * np.float32(contrast) + np.float32(0.5)
    if brightness != 0.0:
        img = img + np.float32(brightness)
    if saturation != 1.0 or hue != 0.0:
        hsv = rgb_to_hsv(np.clip(img, 0.0, 1.0))
        hsv[..., 0] = (hsv[..., 0] + np.float32(hue)) % np.float32(1.0)
        hsv[..., 1] = np.clip(hsv[..., 1] * np.float32(saturation), 0.0, 1.0)
        img = hsv_to_rgb(hsv)
    return img


def augment(image: np.ndarray, cfg: AugmentConfig, episode_seed: int,
            step_index: int) -> np.ndarray:
    """Apply the episode transform plus this step's reduced jitter.

    Pure function of (image, cfg, episode_seed, step_index); float32 output
    in [0, 1] with the input's H x W x 3 shape.
    """
    ep = sample_episode_transform(cfg, episode_seed)
    img = np.asarray(image, dtype=np.float32)
    if ep.zoom != 1.0 or ep.shift != (0.0, 0.0):
        img = _resample_bilinear(img, ep.zoom, ep.shift)
    if ep.permutation != (0, 1, 2):
        img = img[..., list(ep.permutation)]
    img = _apply_color(img, ep.brightness, ep.contrast, ep.saturation, ep.hue)
    db, dc, ds, dh = _sample_step_jitter(cfg, episode_seed, step_index)
    if (db, dc, ds, dh) != (0.0, 1.0, 1.0, 0.0):
        img = _apply_color(img, db, dc, ds, dh)
    return np.clip(img, 0.0, 1.0).astype(np.float32)
