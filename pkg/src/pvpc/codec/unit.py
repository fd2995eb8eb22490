"""Block-hybrid coding of one frame (a coding unit).

Per 8x8 block the encoder tries every mode allowed by the unit's reference
count and keeps the one minimising ``SSE + lambda * bits``. Block syntax::

    ue(mode)
    [se(dx) se(dy)] per motion vector the mode uses
    per channel, unless mode is skip: run-level coded zigzag levels

Modes by reference count (the index is the coded value):

    0 refs: dc, h, v
    1 ref:  skip, inter0, dc, h, v
    2 refs: skip, inter0, inter1, bi, dc, h, v
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import BitstreamError, SchedulingViolation
from .entropy import (
    BitReader, BitWriter, read_run_level, run_level_bits, se_bits_array, ue_bits, write_run_level,
)
from .transform import (
    INV_ZIGZAG, ZIGZAG, dequantize_int, forward_int, inverse_int, quantize_int,
)

B = 8
INTRA_MODES = ("dc", "h", "v")
MODE_TABLES = {
    0: INTRA_MODES,
    1: ("skip", "inter0") + INTRA_MODES,
    2: ("skip", "inter0", "inter1", "bi") + INTRA_MODES,
}
MV_USE = {"inter0": (0,), "inter1": (1,), "bi": (0, 1)}


@dataclass(frozen=True)
class CodecConfig:
    block_size: int = B
    search_range: int = 24
    lambda_scale: float = 0.85
    bit_depth: int = 8
    lossless: bool = False

    def __post_init__(self):
        if self.block_size != B:
            raise ValueError("only 8x8 blocks are supported")
        if not 0 <= self.search_range <= 255:
            raise ValueError("search_range must be in [0, 255]")
        if not 1 <= self.bit_depth <= 12:
            raise ValueError("bit_depth must be in [1, 12]")


@dataclass(frozen=True)
class UnitSpec:
    view: int
    frame: int
    slice_type: str
    refs: tuple
    qp: int


@dataclass
class EncodedUnit:
    view: int
    frame: int
    qp: int
    slice_type: str
    refs: tuple
    height: int
    width: int
    channels: int
    payload: bytes
    bit_length: int
    modes: np.ndarray = field(repr=False, default=None)
    mvs: np.ndarray = field(repr=False, default=None)

    @property
    def spec(self) -> UnitSpec:
        return UnitSpec(self.view, self.frame, self.slice_type, self.refs, self.qp)


def lagrangian(qp: int, config: CodecConfig) -> float:
    return config.lambda_scale * 2.0 ** ((qp - 12) / 3.0)


def _as_hwc(frame) -> np.ndarray:
    arr = np.asarray(frame, dtype=np.int64)
    return arr[..., None] if arr.ndim == 2 else arr


def _pad_to_blocks(frame: np.ndarray) -> np.ndarray:
    h, w = frame.shape[:2]
    ph, pw = -h % B, -w % B
    if ph or pw:
        frame = np.pad(frame, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return frame


def _gather_refs(spec, references: Mapping, shape) -> list:
    refs = []
    for key in spec.refs:
        key = tuple(key)
        if key not in references or references[key] is None:
            raise SchedulingViolation(
                f"unit ({spec.view},{spec.frame}) needs reference {key} before it is reconstructed"
            )
        ref = _as_hwc(references[key])
        if ref.shape != shape:
            raise SchedulingViolation(f"reference {key} has shape {ref.shape}, expected {shape}")
        refs.append(_pad_to_blocks(ref))
    return refs


def _displacement_order(r: int) -> np.ndarray:
    d = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    flat = np.arange(dy.size)
    keys = sorted(flat, key=lambda i: (abs(dy.flat[i]) + abs(dx.flat[i]), dy.flat[i], dx.flat[i]))
    return np.asarray(keys)


def motion_search(current: np.ndarray, reference: np.ndarray, search_range: int) -> np.ndarray:
    """Full-search integer motion vectors minimising block SSE.

    Works on 2-D planes whose sides are multiples of 8 and returns
    ``(rows, cols, 2)`` vectors as ``(dy, dx)``. The reference is
    edge-extended. Ties prefer the smallest ``|dy| + |dx|``, then smaller
    ``dy``, then smaller ``dx``. Correlations are computed by FFT and
    rounded, which is exact for sample depths up to 12 bits.
    """
    cur = np.asarray(current, dtype=np.float64)
    h, w = cur.shape
    rows, cols = h // B, w // B
    r = search_range
    if r == 0:
        return np.zeros((rows, cols, 2), np.int64)
    padded = np.pad(np.asarray(reference, dtype=np.float64), r, mode="edge")
    # a span-sized circular correlation never wraps for lags 0..2r
    span = B + 2 * r
    size = scipy.fft.next_fast_len(span, real=True)

    windows = sliding_window_view(padded, (span, span))[::B, ::B]
    blocks = cur.reshape(rows, B, cols, B).transpose(0, 2, 1, 3)
    corr = scipy.fft.irfft2(
        scipy.fft.rfft2(windows, (size, size)) * np.conj(scipy.fft.rfft2(blocks, (size, size))),
        (size, size),
    )[..., : 2 * r + 1, : 2 * r + 1]
    corr = np.rint(corr)

    sq = padded * padded
    integral = np.zeros((sq.shape[0] + 1, sq.shape[1] + 1))
    integral[1:, 1:] = sq.cumsum(0).cumsum(1)
    box = integral[B:, B:] - integral[:-B, B:] - integral[B:, :-B] + integral[:-B, :-B]
    energy = sliding_window_view(box, (2 * r + 1, 2 * r + 1))[::B, ::B][:rows, :cols]
    block_energy = (blocks * blocks).sum(axis=(2, 3))[..., None, None]
    sse = block_energy - 2 * corr + energy

    # SSE values are exact integers, so the tie-break rank fits below them
    rank = np.empty((2 * r + 1) ** 2)
    rank[_displacement_order(r)] = np.arange(rank.size)
    key = sse.reshape(rows, cols, -1) * rank.size + rank
    best = np.argmin(key, axis=-1)
    dy, dx = np.divmod(best, 2 * r + 1)
    return np.stack([dy - r, dx - r], axis=-1).astype(np.int64)


def motion_compensate(reference: np.ndarray, mvs: np.ndarray) -> np.ndarray:
    """Per-block displaced copy of ``reference`` (edge-clamped)."""
    h, w, c = reference.shape
    rows, cols = mvs.shape[:2]
    ys = (np.arange(rows) * B)[:, None, None, None] + mvs[:, :, 0, None, None] + np.arange(B)[None, None, :, None]
    xs = (np.arange(cols) * B)[None, :, None, None] + mvs[:, :, 1, None, None] + np.arange(B)[None, None, None, :]
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    blocks = reference[ys, xs]  # (rows, cols, B, B, c)
    return blocks.transpose(0, 2, 1, 3, 4).reshape(rows * B, cols * B, c)


def _mc_block(reference: np.ndarray, y: int, x: int, mv) -> np.ndarray:
    h, w = reference.shape[:2]
    ys = np.clip(np.arange(y, y + B) + mv[0], 0, h - 1)
    xs = np.clip(np.arange(x, x + B) + mv[1], 0, w - 1)
    return reference[ys[:, None], xs[None, :]]


def intra_predictions(recon: np.ndarray, y: int, x: int, bit_depth: int) -> np.ndarray:
    """DC, horizontal and vertical predictions ``(3, 8, 8, C)`` from reconstructed borders."""
    c = recon.shape[2]
    mid = 1 << (bit_depth - 1)
    left = recon[y:y + B, x - 1, :] if x > 0 else None
    top = recon[y - 1, x:x + B, :] if y > 0 else None
    if left is not None and top is not None:
        dc = (left.sum(0) + top.sum(0) + B) // (2 * B)
    elif left is not None:
        dc = (left.sum(0) + B // 2) // B
    elif top is not None:
        dc = (top.sum(0) + B // 2) // B
    else:
        dc = np.full(c, mid, np.int64)
    out = np.empty((3, B, B, c), np.int64)
    out[0] = dc
    out[1] = left[:, None, :] if left is not None else mid
    out[2] = top[None, :, :] if top is not None else mid
    return out


def predict_block(mode: str, recon: np.ndarray, refs: Sequence[np.ndarray], y: int, x: int,
                  mvs=((0, 0), (0, 0)), bit_depth: int = 8) -> np.ndarray:
    """Prediction for one block; ``refs`` are reconstructed, block-padded references."""
    if mode in INTRA_MODES:
        return intra_predictions(recon, y, x, bit_depth)[INTRA_MODES.index(mode)]
    need = {"skip": (0,), "inter0": (0,), "inter1": (1,), "bi": (0, 1)}[mode]
    for k in need:
        if k >= len(refs) or refs[k] is None:
            raise SchedulingViolation(f"mode {mode} needs reference {k}")
    if mode == "skip":
        return _mc_block(refs[0], y, x, (0, 0))
    if mode == "bi":
        return (_mc_block(refs[0], y, x, mvs[0]) + _mc_block(refs[1], y, x, mvs[1]) + 1) >> 1
    k = need[0]
    return _mc_block(refs[k], y, x, mvs[k])


def _residual_levels(residual, qp, intra, lossless):
    """``residual`` is ``(K, C, 8, 8)``; returns (zigzag levels, reconstructed residual)."""
    if lossless:
        flat = residual.reshape(residual.shape[:2] + (B * B,))
        return flat[..., ZIGZAG], residual
    levels = quantize_int(forward_int(residual), qp, intra)
    rec = inverse_int(dequantize_int(levels, qp))
    flat = levels.reshape(levels.shape[:2] + (B * B,))
    return flat[..., ZIGZAG], rec


def _levels_to_residual(zz, qp, lossless):
    """Decoder side: zigzag levels ``(C, 64)`` to reconstructed residual ``(C, 8, 8)``."""
    raster = zz[..., INV_ZIGZAG].reshape(zz.shape[0], B, B)
    if lossless:
        return raster
    return inverse_int(dequantize_int(raster, qp))


def encode_unit(frame, spec, references: Mapping, config: CodecConfig = CodecConfig()):
    """Encode ``frame`` (``(H, W)`` or ``(H, W, C)`` ints). Returns ``(EncodedUnit, recon)``.

    The reconstruction is always ``(H, W, C)`` and bit-identical to what
    :func:`decode_unit` produces.

    ``references`` maps ``(view, frame)`` keys to reconstructed frames;
    every key in ``spec.refs`` must be present.
    """
    cur0 = _as_hwc(frame)
    height, width, channels = cur0.shape
    refs = _gather_refs(spec, references, cur0.shape)
    cur = _pad_to_blocks(cur0)
    h, w = cur.shape[:2]
    rows, cols = h // B, w // B
    maxv = (1 << config.bit_depth) - 1
    modes = MODE_TABLES[len(refs)]
    intra_slice = len(refs) == 0
    lam = lagrangian(spec.qp, config)
    mode_bits = np.array([ue_bits(i) for i in range(len(modes))])

    mv_fields = [motion_search(cur[..., 0], ref[..., 0], config.search_range) for ref in refs]
    inter_frames = {}
    if refs:
        inter_frames["skip"] = refs[0]
        inter_frames["inter0"] = motion_compensate(refs[0], mv_fields[0])
    if len(refs) == 2:
        inter_frames["inter1"] = motion_compensate(refs[1], mv_fields[1])
        inter_frames["bi"] = (inter_frames["inter0"] + inter_frames["inter1"] + 1) >> 1
    mv_bits = [se_bits_array(f).sum(axis=-1) for f in mv_fields]
    n_inter = len(modes) - len(INTRA_MODES)

    recon = np.zeros_like(cur)
    writer = BitWriter()
    chosen = np.zeros((rows, cols), np.int64)
    for by in range(rows):
        y = by * B
        for bx in range(cols):
            x = bx * B
            block = cur[y:y + B, x:x + B]
            preds = np.empty((len(modes), B, B, channels), np.int64)
            for i, name in enumerate(modes[:n_inter]):
                preds[i] = inter_frames[name][y:y + B, x:x + B]
            preds[n_inter:] = intra_predictions(recon, y, x, config.bit_depth)

            residual = (block[None] - preds).transpose(0, 3, 1, 2)
            zz, rec_res = _residual_levels(residual, spec.qp, intra_slice, config.lossless)
            if refs:
                zz[0] = 0
                rec_res[0] = 0
            rec = np.clip(preds.transpose(0, 3, 1, 2) + rec_res, 0, maxv)
            dist = ((block.transpose(2, 0, 1)[None] - rec) ** 2).sum(axis=(1, 2, 3))
            bits = mode_bits + run_level_bits(zz).sum(axis=-1)
            if refs:
                bits[0] = mode_bits[0]
                for i, name in enumerate(modes[:n_inter]):
                    for k in MV_USE.get(name, ()):
                        bits[i] += mv_bits[k][by, bx]
            cost = dist + lam * bits
            if config.lossless:
                # only exact candidates qualify; skip is the one that may not be
                cost = np.where(dist > 0, np.inf, bits.astype(np.float64))
            best = int(np.argmin(cost))
            name = modes[best]

            writer.write_ue(best)
            for k in MV_USE.get(name, ()):
                writer.write_se(int(mv_fields[k][by, bx, 1]))
                writer.write_se(int(mv_fields[k][by, bx, 0]))
            if name != "skip":
                for c in range(channels):
                    write_run_level(writer, zz[best, c])
            recon[y:y + B, x:x + B] = rec[best].transpose(1, 2, 0)
            chosen[by, bx] = best

    mv_out = np.stack(mv_fields) if mv_fields else np.zeros((0, rows, cols, 2), np.int64)
    unit = EncodedUnit(
        spec.view, spec.frame, spec.qp, spec.slice_type, tuple(tuple(r) for r in spec.refs),
        height, width, channels, writer.getvalue(), writer.bit_length, chosen, mv_out,
    )
    return unit, recon[:height, :width]


def decode_unit(unit: EncodedUnit, references: Mapping, config: CodecConfig = CodecConfig()):
    shape = (unit.height, unit.width, unit.channels)
    refs = _gather_refs(unit.spec, references, shape)
    if unit.bit_length == 0 or not unit.payload:
        raise BitstreamError("empty unit payload", 0)
    reader = BitReader(unit.payload, unit.bit_length)
    h = unit.height + (-unit.height % B)
    w = unit.width + (-unit.width % B)
    channels = unit.channels
    maxv = (1 << config.bit_depth) - 1
    modes = MODE_TABLES[len(refs)]
    r = config.search_range
    recon = np.zeros((h, w, channels), np.int64)
    for y in range(0, h, B):
        for x in range(0, w, B):
            index = reader.read_ue()
            if index >= len(modes):
                raise BitstreamError(f"mode index {index} out of range", reader.byte_offset)
            name = modes[index]
            mvs = [(0, 0), (0, 0)]
            for k in MV_USE.get(name, ()):
                dx = reader.read_se()
                dy = reader.read_se()
                if abs(dx) > r or abs(dy) > r:
                    raise BitstreamError("motion vector outside search range", reader.byte_offset)
                mvs[k] = (dy, dx)
            pred = predict_block(name, recon, refs, y, x, mvs, config.bit_depth)
            if name == "skip":
                recon[y:y + B, x:x + B] = pred
                continue
            zz = np.stack([read_run_level(reader) for _ in range(channels)])
            res = _levels_to_residual(zz, unit.qp, config.lossless)
            recon[y:y + B, x:x + B] = np.clip(pred + res.transpose(1, 2, 0), 0, maxv)
    if not reader.exhausted():
        raise BitstreamError("trailing bits after last block", reader.byte_offset)
    return recon[:unit.height, :unit.width]
