"""8x8 DCT-II and scalar quantization.

Two paths exist. ``forward_transform``/``inverse_transform``/``quantize``/
``dequantize`` are the real-valued reference. The codec itself runs the
integer path (``*_int``): the kernel is ``round(4096 * C)`` for the
orthonormal DCT matrix ``C``, coefficients carry a ``2**24`` scale, and the
quantizer step is the fixed-point ``qstep_fixed(qp) / 2**16``. Every
operation of the integer path is exact int64 arithmetic, so bitstreams do
not depend on the platform's floating point.
"""

from __future__ import annotations

import numpy as np

N = 8
KERNEL_SHIFT = 12
COEF_SHIFT = 2 * KERNEL_SHIFT  # forward output scale: 2**24
QSTEP_SHIFT = 16
# round(2**((k - 4) / 6) * 2**16) for k = 0..5
_QSTEP_BASE = (41285, 46341, 52016, 58386, 65536, 73562)
INTRA_DEADZONE = (1, 3)
INTER_DEADZONE = (1, 6)


def dct_matrix(n: int = N) -> np.ndarray:
    k = np.arange(n)
    c = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * k[None, :] + 1) * k[:, None] / (2 * n))
    c[0] /= np.sqrt(2.0)
    return c


DCT = dct_matrix()
DCT_INT = np.round(DCT * (1 << KERNEL_SHIFT)).astype(np.int64)
DCT_INT_T = np.ascontiguousarray(DCT_INT.T)


def forward_transform(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II of the last two axes."""
    return DCT @ np.asarray(block, dtype=np.float64) @ DCT.T


def inverse_transform(coefs) -> np.ndarray:
    return DCT.T @ np.asarray(coefs, dtype=np.float64) @ DCT


def qstep(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


def quantize(coefs, qp: int, intra: bool = True) -> np.ndarray:
    offset = 1 / 3 if intra else 1 / 6
    c = np.asarray(coefs, dtype=np.float64)
    return (np.sign(c) * np.floor(np.abs(c) / qstep(qp) + offset)).astype(np.int64)


def dequantize(levels, qp: int) -> np.ndarray:
    return np.asarray(levels, dtype=np.float64) * qstep(qp)


def qstep_fixed(qp: int) -> int:
    if not 0 <= qp <= 51:
        raise ValueError(f"qp {qp} outside [0, 51]")
    return _QSTEP_BASE[qp % 6] << (qp // 6)


def _round_shift(values: np.ndarray, shift: int) -> np.ndarray:
    return (values + (1 << (shift - 1))) >> shift


def forward_int(blocks: np.ndarray) -> np.ndarray:
    """Integer DCT of ``(..., 8, 8)`` residuals; output scaled by ``2**24``."""
    return DCT_INT @ blocks.astype(np.int64) @ DCT_INT_T


def inverse_int(scaled: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward_int` with round-half-up back to integers."""
    stage = _round_shift(DCT_INT_T @ scaled, COEF_SHIFT)
    return _round_shift(stage @ DCT_INT, COEF_SHIFT)


def quantize_int(scaled: np.ndarray, qp: int, intra: bool) -> np.ndarray:
    num, den = INTRA_DEADZONE if intra else INTER_DEADZONE
    step = qstep_fixed(qp) << (COEF_SHIFT - QSTEP_SHIFT)
    mag = (np.abs(scaled) * den + num * step) // (den * step)
    return np.where(scaled < 0, -mag, mag)


def dequantize_int(levels: np.ndarray, qp: int) -> np.ndarray:
    return levels.astype(np.int64) * (qstep_fixed(qp) << (COEF_SHIFT - QSTEP_SHIFT))


ZIGZAG = np.array(
    sorted(((y, x) for y in range(N) for x in range(N)),
           key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1])),
).dot([N, 1])
INV_ZIGZAG = np.argsort(ZIGZAG)
