"""PVPC bitstream container: header, occupancy, patch map, unit payloads.

All multi-byte integers are little-endian. The byte layout is documented in
BITSTREAM.md at the repository root.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import BitstreamError
from .structure import ANCHOR, CodingStructure, CodingUnit

MAGIC = b"PVPC"
VERSION = 1

FLAG_LOSSLESS = 1
FLAG_GROUP_PADDING = 2
FLAG_MULTIVIEW = 4
FLAG_RGB = 8

_LEVEL_CODE = {ANCHOR: 255, 0: 0, 1: 1, 2: 2, 3: 3}
_LEVEL_DECODE = {v: k for k, v in _LEVEL_CODE.items()}
_SLICE_CODE = {"I": 0, "P": 1, "B": 2}
_SLICE_DECODE = {v: k for k, v in _SLICE_CODE.items()}

_FIXED = struct.Struct("<4sBBHHHBB3I3IBdBB")
_PATCH = struct.Struct("<BBHHHHIII")
_UNIT = struct.Struct("<HBBBBB")
_REF = struct.Struct("<HB")


@dataclass(frozen=True)
class PatchInfo:
    """Per-patch metadata needed to invert the projection."""

    axis: int
    rotation: int
    x0: int
    y0: int
    width: int
    height: int
    u0: int
    v0: int
    depth_offset: int


@dataclass
class StreamHeader:
    view_count: int
    width: int
    height: int
    geom_bit_depth: int
    attr_bit_depth: int
    bbox_min: tuple
    bbox_max: tuple
    search_range: int
    lambda_scale: float
    qp_i: int
    qp_geom: int
    flags: int
    patches: list = field(default_factory=list)
    structure: CodingStructure | None = None

    @property
    def lossless(self) -> bool:
        return bool(self.flags & FLAG_LOSSLESS)

    @property
    def rgb(self) -> bool:
        return bool(self.flags & FLAG_RGB)


@dataclass
class UnitPayload:
    payload: bytes
    bit_length: int


def write_container(header: StreamHeader, occupancy: bytes, patch_map: bytes, units) -> bytes:
    out = bytearray()
    out += _FIXED.pack(
        MAGIC, VERSION, header.flags, header.view_count, header.width, header.height,
        header.geom_bit_depth, header.attr_bit_depth, *header.bbox_min, *header.bbox_max,
        header.search_range, header.lambda_scale, header.qp_i, header.qp_geom,
    )
    out += struct.pack("<I", len(header.patches))
    for p in header.patches:
        out += _PATCH.pack(p.axis, p.rotation, p.x0, p.y0, p.width, p.height, p.u0, p.v0, p.depth_offset)
    units_meta = header.structure.units
    out += struct.pack("<H", len(units_meta))
    for u in units_meta:
        out += _UNIT.pack(u.view, u.frame, _SLICE_CODE[u.slice_type], _LEVEL_CODE[u.level], u.qp, len(u.refs))
        for v, f in u.refs:
            out += _REF.pack(v, f)
    for blob in (occupancy, patch_map):
        out += struct.pack("<I", len(blob)) + blob
    for unit in units:
        out += struct.pack("<II", len(unit.payload), unit.bit_length) + unit.payload
    return bytes(out)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: struct.Struct | str):
        fmt = struct.Struct(fmt) if isinstance(fmt, str) else fmt
        end = self.pos + fmt.size
        if end > len(self.data):
            raise BitstreamError("container truncated", self.pos)
        values = fmt.unpack_from(self.data, self.pos)
        self.pos = end
        return values

    def blob(self, length: int) -> bytes:
        end = self.pos + length
        if end > len(self.data):
            raise BitstreamError("container truncated inside payload", self.pos)
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk


def read_container(data: bytes):
    """Parse a container into ``(header, occupancy, patch_map, units)``.

    ``units`` holds the two geometry units followed by the attribute units
    in decoding order.
    """
    cur = _Cursor(bytes(data))
    fixed = cur.take(_FIXED)
    magic, version, flags, views, width, height, gbd, abd = fixed[:8]
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise BitstreamError(f"unsupported version {version}", 4)
    bbox_min, bbox_max = tuple(fixed[8:11]), tuple(fixed[11:14])
    search_range, lambda_scale, qp_i, qp_geom = fixed[14:18]

    (n_patches,) = cur.take("<I")
    patches = [PatchInfo(*cur.take(_PATCH)) for _ in range(n_patches)]
    (n_units,) = cur.take("<H")
    units_meta = []
    for _ in range(n_units):
        view, frame, slice_code, level_code, qp, n_refs = cur.take(_UNIT)
        if slice_code not in _SLICE_DECODE or level_code not in _LEVEL_DECODE:
            raise BitstreamError("bad coding-structure entry", cur.pos)
        refs = tuple(cur.take(_REF) for _ in range(n_refs))
        units_meta.append(CodingUnit(view, frame, _SLICE_DECODE[slice_code],
                                     _LEVEL_DECODE[level_code], refs, qp))
    if n_units != 2 * views:
        raise BitstreamError(f"{n_units} attribute units for {views} views", cur.pos)
    mode = "multiview" if flags & FLAG_MULTIVIEW else "independent"
    structure = CodingStructure(views, qp_i, tuple(units_meta), mode)

    occupancy = cur.blob(cur.take("<I")[0])
    patch_map = cur.blob(cur.take("<I")[0])
    units = []
    for _ in range(2 + n_units):
        length, bits = cur.take("<II")
        units.append(UnitPayload(cur.blob(length), bits))
    if cur.pos != len(cur.data):
        raise BitstreamError("trailing bytes after last unit", cur.pos)
    header = StreamHeader(views, width, height, gbd, abd, bbox_min, bbox_max, search_range,
                          lambda_scale, qp_i, qp_geom, flags, patches, structure)
    return header, occupancy, patch_map, units
