"""Depth -> RGB via a calibrated polynomial look-up table.

The table maps image-space depth gradients (g_x, g_y), in meters per pixel,
through one polynomial per color channel.  Keying on gradients rather than
raw depth is what lets a flat background stay one color while slopes pick up
directional shading.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LutResolutionMismatch, RankDeficient
from .depth import DepthImage

LUT_FORMAT_VERSION = 1


def monomial_exponents(degree: int):
    """Deterministic ordering: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ..."""
    return [(s - j, j) for s in range(degree + 1) for j in range(s + 1)]


def depth_gradients(depth_values: np.ndarray):
    """Central-difference image gradients (one-sided at borders), m/px."""
    g_y, g_x = np.gradient(depth_values, axis=(-2, -1))
    return g_x, g_y


@dataclass
class PolyLut:
    """Per-channel polynomial over (g_x, g_y) up to a total degree.

    coeffs: (3, n_terms) following monomial_exponents(degree); the constant
    term IS the background color, so a flat depth image maps to it exactly.
    """

    degree: int
    coeffs: np.ndarray
    image_size: tuple       # (W, H) the gradients were calibrated at
    sensor_id: str = ""
    calibrated_on: str = ""
    residual_rms: float = 0.0

    def __post_init__(self):
        if not (2 <= self.degree <= 4):
            raise ValueError("LUT degree must be in [2, 4]")
        n_terms = len(monomial_exponents(self.degree))
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(3, n_terms)

    @property
    def background_color(self) -> np.ndarray:
        return self.coeffs[:, 0].copy()

    def evaluate(self, g_x, g_y) -> np.ndarray:
        basis = _design_matrix(np.asarray(g_x), np.asarray(g_y), self.degree)
        rgb = basis @ self.coeffs.T
        return np.clip(rgb, 0.0, 1.0)


def _design_matrix(g_x, g_y, degree):
    cols = [np.ones_like(g_x) if (i, j) == (0, 0) else (g_x ** i) * (g_y ** j)
            for i, j in monomial_exponents(degree)]
    return np.stack(cols, axis=-1)


def depth_to_rgb(depth: DepthImage, lut: PolyLut) -> np.ndarray:
    """(..., H, W, 3) image in [0, 1] from gradient-keyed LUT evaluation."""
    if (depth.width, depth.height) != tuple(lut.image_size):
        raise LutResolutionMismatch(
            f"LUT calibrated at {lut.image_size}, image is "
            f"{(depth.width, depth.height)}"
        )
    g_x, g_y = depth_gradients(depth.values)
    return lut.evaluate(g_x, g_y)


def calibrate_lut(samples, degree: int, sensor_id: str = "",
                  calibrated_on: str = "") -> PolyLut:
    """Least-squares fit of the per-channel polynomials.

    samples: iterable of (depth_values (H, W), rgb (H, W, 3)) pairs.
    Raises RankDeficient when the pooled gradients do not excite every
    monomial direction.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no calibration samples")
    H, W = samples[0][0].shape
    gx_all, gy_all, rgb_all = [], [], []
    for depth_values, rgb in samples:
        g_x, g_y = depth_gradients(np.asarray(depth_values, dtype=np.float64))
        gx_all.append(g_x.reshape(-1))
        gy_all.append(g_y.reshape(-1))
        rgb_all.append(np.asarray(rgb, dtype=np.float64).reshape(-1, 3))
    A = _design_matrix(np.concatenate(gx_all), np.concatenate(gy_all), degree)
    B = np.concatenate(rgb_all)
    n_terms = A.shape[1]
    if len(A) < n_terms:
        raise RankDeficient(f"{len(A)} pixels for {n_terms} terms")
    # column scaling keeps the rank test meaningful across gradient magnitudes
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise RankDeficient("a monomial is identically zero over the samples")
    coef, _, rank, _ = np.linalg.lstsq(A / scale, B, rcond=1e-10)
    if rank < n_terms:
        raise RankDeficient(f"design matrix rank {rank} < {n_terms} terms")
    coef = coef / scale[:, None]
    resid = A @ coef - B
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return PolyLut(degree=degree, coeffs=coef.T, image_size=(W, H),
                   sensor_id=sensor_id, calibrated_on=calibrated_on,
                   residual_rms=rms)


# ---------------------------------------------------------------------------
# LUT file: versioned text header + coefficient table
# ---------------------------------------------------------------------------


def write_lut(lut: PolyLut, path) -> None:
    exps = monomial_exponents(lut.degree)
    with open(path, "w") as fh:
        fh.write(f"GELSIM-LUT v{LUT_FORMAT_VERSION}\n")
        fh.write(f"degree: {lut.degree}\n")
        fh.write("channels: 3\n")
        bg = lut.background_color
        fh.write(f"background: {bg[0]:.9g} {bg[1]:.9g} {bg[2]:.9g}\n")
        fh.write(f"image_size: {lut.image_size[0]} {lut.image_size[1]}\n")
        fh.write(f"sensor_id: {lut.sensor_id}\n")
        fh.write(f"calibrated_on: {lut.calibrated_on}\n")
        fh.write(f"residual_rms: {lut.residual_rms:.9g}\n")
        fh.write(f"terms: {len(exps)}\n")
        for k, (i, j) in enumerate(exps):
            c = lut.coeffs[:, k]
            fh.write(f"{i} {j} {c[0]:.17g} {c[1]:.17g} {c[2]:.17g}\n")


def read_lut(path) -> PolyLut:
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if not header.startswith("GELSIM-LUT v"):
            raise ValueError(f"{path}: not a LUT file")
        if int(header.split("v")[-1]) != LUT_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported LUT version")
        meta = {}
        for _ in range(8):
            key, val = fh.readline().split(":", 1)
            meta[key.strip()] = val.strip()
        degree = int(meta["degree"])
        n_terms = int(meta["terms"])
        coeffs = np.zeros((3, n_terms))
        exps = monomial_exponents(degree)
        for k in range(n_terms):
            parts = fh.readline().split()
            assert (int(parts[0]), int(parts[1])) == exps[k]
            coeffs[:, k] = [float(p) for p in parts[2:5]]
    W, H = (int(x) for x in meta["image_size"].split())
    return PolyLut(degree=degree, coeffs=coeffs, image_size=(W, H),
                   sensor_id=meta["sensor_id"], calibrated_on=meta["calibrated_on"],
                   residual_rms=float(meta["residual_rms"]))


def synthetic_lut(image_size, degree: int = 2, background=(0.35, 0.38, 0.45),
                  seed: int = 0) -> PolyLut:
    """Plausible GelSight-style table for tests and demos: three directional
    shading lobes plus mild curvature terms."""
    rng = np.random.default_rng(seed)
    exps = monomial_exponents(degree)
    coeffs = np.zeros((3, len(exps)))
    coeffs[:, 0] = background
    # directional linear terms per channel (simulated tri-color illumination)
    directions = np.array([[1.0, 0.3], [-0.6, 0.8], [-0.4, -0.9]])
    for ch in range(3):
        for k, (i, j) in enumerate(exps):
            if i + j == 1:
                coeffs[ch, k] = 3.5 * directions[ch, 0 if i else 1]
            elif i + j >= 2:
                coeffs[ch, k] = rng.uniform(-8.0, 8.0)
    return PolyLut(degree=degree, coeffs=coeffs, image_size=tuple(image_size))
