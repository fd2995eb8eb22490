"""BT.709 full-range RGB <-> YCbCr."""

from __future__ import annotations

import numpy as np

KR, KB = 0.2126, 0.0722
KG = 1.0 - KR - KB


def rgb_to_ycbcr_float(rgb, bit_depth: int = 8) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mid = float(1 << (bit_depth - 1))
    y = KR * r + KG * g + KB * b
    cb = (b - y) / (2 * (1 - KB)) + mid
    cr = (r - y) / (2 * (1 - KR)) + mid
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb_float(ycc, bit_depth: int = 8) -> np.ndarray:
    ycc = np.asarray(ycc, dtype=np.float64)
    mid = float(1 << (bit_depth - 1))
    y, cb, cr = ycc[..., 0], ycc[..., 1] - mid, ycc[..., 2] - mid
    r = y + 2 * (1 - KR) * cr
    b = y + 2 * (1 - KB) * cb
    g = (y - KR * r - KB * b) / KG
    return np.stack([r, g, b], axis=-1)


def _round_clip(values, bit_depth):
    return np.clip(np.floor(values + 0.5), 0, (1 << bit_depth) - 1).astype(np.int64)


def rgb_to_ycbcr(rgb, bit_depth: int = 8) -> np.ndarray:
    """Integer conversion (round-half-up, clipped) used before coding."""
    return _round_clip(rgb_to_ycbcr_float(rgb, bit_depth), bit_depth)


def ycbcr_to_rgb(ycc, bit_depth: int = 8) -> np.ndarray:
    return _round_clip(ycbcr_to_rgb_float(ycc, bit_depth), bit_depth)
