"""Force-field export: TFF1 binary frames and shear-map images."""
from __future__ import annotations

import struct

import numpy as np

from .field import ForceField

TFF_MAGIC = b"TFF1"


def write_force_field_frames(path, fields) -> None:
    """Write ForceField frames back to back: magic, rows, cols, 6*f32/point."""
    with open(path, "wb") as fh:
        for fld in fields:
            if fld.f_n.ndim != 3:
                raise ValueError("write one env per frame (rows, cols, 3)")
            rows, cols = fld.rows, fld.cols
            fh.write(TFF_MAGIC)
            fh.write(struct.pack("<2I", rows, cols))
            per_point = np.concatenate([fld.f_n, fld.f_t], axis=-1)  # (R, C, 6)
            fh.write(per_point.astype("<f4").tobytes(order="C"))


def read_force_field_frames(path) -> list:
    out = []
    with open(path, "rb") as fh:
        while True:
            head = fh.read(4)
            if not head:
                break
            if head != TFF_MAGIC:
                raise ValueError(f"{path}: bad frame magic {head!r}")
            rows, cols = struct.unpack("<2I", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 6 * 4), dtype="<f4")
            data = data.reshape(rows, cols, 6).astype(np.float64)
            out.append(ForceField(f_n=data[..., :3], f_t=data[..., 3:]))
    return out


def shear_map_image(fld: ForceField, upscale: int = 16) -> np.ndarray:
    """Normalized shear field as an RG-encoded uint8 image (B is neutral).

    Red encodes +x shear, green +y, both centered at 128; magnitudes are
    normalized by the frame's own peak so directionality reads at a glance.
    """
    fx = fld.f_t[..., 0]
    fy = fld.f_t[..., 1]
    peak = max(float(np.abs(fx).max(initial=0.0)), float(np.abs(fy).max(initial=0.0)), 1e-12)
    r = 0.5 + 0.5 * fx / peak
    g = 0.5 + 0.5 * fy / peak
    b = np.full_like(r, 0.5)
    img = np.stack([r, g, b], axis=-1)
    img = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
    if upscale > 1:
        img = np.repeat(np.repeat(img, upscale, axis=0), upscale, axis=1)
    return img
