"""Lossless run-length coding of binary occupancy and patch-index maps."""

from __future__ import annotations

import numpy as np

from ..errors import BitstreamError
from .entropy import BitReader, BitWriter


def _runs(values: np.ndarray):
    flat = np.asarray(values).reshape(-1)
    if flat.size == 0:
        return flat, np.zeros(0, np.int64)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.r_[0, change]
    lengths = np.diff(np.r_[starts, flat.size])
    return flat[starts], lengths


def code_occupancy(occupancy: np.ndarray) -> bytes:
    """``ue(width) ue(height) u(1) first value``, then ``ue(run - 1)`` per run, row-major."""
    occ = np.asarray(occupancy).astype(bool)
    height, width = occ.shape
    writer = BitWriter()
    writer.write_ue(width)
    writer.write_ue(height)
    values, lengths = _runs(occ)
    writer.write_bits(int(values[0]) if len(values) else 0, 1)
    for length in lengths:
        writer.write_ue(int(length) - 1)
    return writer.getvalue()


def decode_occupancy(data: bytes) -> np.ndarray:
    reader = BitReader(data)
    width = reader.read_ue()
    height = reader.read_ue()
    total = width * height
    value = reader.read_bits(1)
    out = np.zeros(total, np.uint8)
    pos = 0
    while pos < total:
        length = reader.read_ue() + 1
        if pos + length > total:
            raise BitstreamError("occupancy run overflows the map", reader.byte_offset)
        out[pos:pos + length] = value
        pos += length
        value ^= 1
    if any(reader.read_bits(1) for _ in range(reader.limit - reader.pos)):
        raise BitstreamError("non-zero trailing bits in occupancy payload", reader.byte_offset)
    return out.reshape(height, width)


def code_patch_map(patch_map: np.ndarray, occupancy: np.ndarray) -> bytes:
    """Patch index of every occupied pixel in raster order as ``ue(index) ue(run - 1)`` pairs."""
    labels = np.asarray(patch_map)[np.asarray(occupancy).astype(bool)]
    if labels.size and labels.min() < 0:
        raise ValueError("occupied pixel without a patch")
    writer = BitWriter()
    values, lengths = _runs(labels)
    for value, length in zip(values, lengths):
        writer.write_ue(int(value))
        writer.write_ue(int(length) - 1)
    return writer.getvalue()


def decode_patch_map(data: bytes, occupancy: np.ndarray) -> np.ndarray:
    occ = np.asarray(occupancy).astype(bool)
    total = int(occ.sum())
    labels = np.empty(total, np.int64)
    reader = BitReader(data)
    pos = 0
    while pos < total:
        value = reader.read_ue()
        length = reader.read_ue() + 1
        if pos + length > total:
            raise BitstreamError("patch map run overflows the occupied pixels", reader.byte_offset)
        labels[pos:pos + length] = value
        pos += length
    out = np.full(occ.shape, -1, np.int64)
    out[occ] = labels
    return out
