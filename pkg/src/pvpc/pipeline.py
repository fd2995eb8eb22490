"""End-to-end encoder and decoder for plenoptic clouds."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .codec.occupancy import code_occupancy, code_patch_map, decode_occupancy, decode_patch_map
from .codec.unit import CodecConfig, EncodedUnit, UnitSpec, decode_unit, encode_unit
from .color import rgb_to_ycbcr, ycbcr_to_rgb
from .container import (
    FLAG_GROUP_PADDING, FLAG_LOSSLESS, FLAG_MULTIVIEW, FLAG_RGB, PatchInfo, StreamHeader,
    UnitPayload, read_container, write_container,
)
from .errors import BitstreamError
from .model import BoundingBox, PlenopticPointCloud, compute_bounding_box, estimate_normals
from .packer import AtlasLayout, pack_patches, rotate, rotated_size
from .padder import GROUP_BLOCK_SIZE, dilate_pad, find_group_paddable, group_pad
from .patcher import SegmentationParams, generate_patches
from .reconstructor import DecodedAtlas, reconstruct_cloud
from .structure import build_coding_structure, build_independent_structure

MODES = ("multiview", "independent")
GEOMETRY_QP_OFFSET = -4


@dataclass(frozen=True)
class EncoderParams:
    qp_i: int = 32
    qp_geom: int | None = None  # defaults to qp_i - 4
    mode: str = "multiview"
    group_padding: bool = True
    lossless: bool = False
    canvas_width: int = 1280
    alignment: int = 16
    search_range: int = 24
    lambda_scale: float = 0.85
    normal_neighbors: int = 16
    group_block_size: int = GROUP_BLOCK_SIZE
    segmentation: SegmentationParams = SegmentationParams()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def geometry_qp(self) -> int:
        if self.qp_geom is not None:
            return self.qp_geom
        return max(0, self.qp_i + GEOMETRY_QP_OFFSET)


@dataclass
class Atlas:
    """Projected planes before padding; ``attributes`` are RGB ``(2, N, H, W, 3)``."""

    layout: AtlasLayout
    patches: list
    geometry: np.ndarray
    attributes: np.ndarray
    missed: np.ndarray
    bbox: BoundingBox

    @property
    def occupancy(self) -> np.ndarray:
        return self.layout.occupancy


@dataclass
class EncodeResult:
    bitstream: bytes
    stats: dict
    atlas: Atlas
    units: list = field(repr=False, default_factory=list)
    reconstruction: dict = field(repr=False, default_factory=dict)


def build_atlas(cloud: PlenopticPointCloud, params: EncoderParams = EncoderParams()) -> Atlas:
    normals = estimate_normals(cloud, min(params.normal_neighbors, len(cloud)))
    patches, missed = generate_patches(cloud, normals, params.segmentation)
    layout = pack_patches([p.occupancy for p in patches], params.canvas_width, params.alignment)
    h, w = layout.canvas_height, layout.canvas_width
    geometry = np.zeros((2, h, w), np.int64)
    attributes = np.zeros((2, cloud.view_count, h, w, 3), np.int64)
    for patch, place in zip(patches, layout.placements):
        pw, ph = rotated_size(patch.width, patch.height, place.rotation)
        mask = rotate(patch.occupancy, place.rotation)
        rows = slice(place.y, place.y + ph)
        cols = slice(place.x, place.x + pw)
        geometry[0, rows, cols][mask] = rotate(patch.near, place.rotation)[mask]
        geometry[1, rows, cols][mask] = rotate(patch.far, place.rotation)[mask]
        for layer in (0, 1):
            rot = np.moveaxis(rotate(np.moveaxis(patch.attributes[layer], 0, 2), place.rotation), 2, 0)
            attributes[layer][:, rows, cols][:, mask] = rot[:, mask]
    return Atlas(layout, patches, geometry, attributes, missed, compute_bounding_box(cloud))


def patch_table(atlas: Atlas) -> list:
    return [
        PatchInfo(p.axis, pl.rotation, pl.x, pl.y, p.width, p.height,
                  p.tangent_offset[0], p.tangent_offset[1], p.depth_offset)
        for p, pl in zip(atlas.patches, atlas.layout.placements)
    ]


def prepare_frames(atlas: Atlas, cloud: PlenopticPointCloud, params: EncoderParams):
    """Color-convert and pad; returns ``(geometry (2,H,W), attributes (2,N,H,W,3))``."""
    occ = atlas.occupancy
    geometry = dilate_pad(atlas.geometry[..., None], occ, cloud.geom_bit_depth)[..., 0]
    attrs = atlas.attributes
    if not params.lossless:
        attrs = rgb_to_ycbcr(attrs, cloud.attr_bit_depth)
    attrs = dilate_pad(attrs, occ, cloud.attr_bit_depth)
    if params.group_padding:
        attrs = group_pad(attrs, find_group_paddable(occ, params.group_block_size))
    return geometry, attrs


def _geometry_specs(qp: int):
    return [UnitSpec(0, 0, "I", (), qp), UnitSpec(0, 1, "P", ((0, 0),), qp)]


def encode_cloud(cloud: PlenopticPointCloud, params: EncoderParams = EncoderParams()) -> EncodeResult:
    timings = {}
    t = time.perf_counter()
    atlas = build_atlas(cloud, params)
    timings["projection"] = time.perf_counter() - t

    t = time.perf_counter()
    geometry, attrs = prepare_frames(atlas, cloud, params)
    timings["padding"] = time.perf_counter() - t

    views = cloud.view_count
    if params.mode == "multiview":
        structure = build_coding_structure(views, params.qp_i)
    else:
        structure = build_independent_structure(views, params.qp_i)

    t = time.perf_counter()
    geom_cfg = CodecConfig(search_range=params.search_range, lambda_scale=params.lambda_scale,
                           bit_depth=cloud.geom_bit_depth, lossless=params.lossless)
    attr_cfg = CodecConfig(search_range=params.search_range, lambda_scale=params.lambda_scale,
                           bit_depth=cloud.attr_bit_depth, lossless=params.lossless)
    units = []
    geom_rec = {}
    for spec in _geometry_specs(params.geometry_qp):
        unit, rec = encode_unit(geometry[spec.frame], spec, geom_rec, geom_cfg)
        geom_rec[(spec.view, spec.frame)] = rec
        units.append(unit)
    timings["geometry_coding"] = time.perf_counter() - t

    t = time.perf_counter()
    attr_rec = {}
    for cu in structure.units:
        spec = UnitSpec(cu.view, cu.frame, cu.slice_type, cu.refs, cu.qp)
        unit, rec = encode_unit(attrs[cu.frame, cu.view], spec, attr_rec, attr_cfg)
        attr_rec[(cu.view, cu.frame)] = rec
        units.append(unit)
    timings["attribute_coding"] = time.perf_counter() - t

    flags = (FLAG_LOSSLESS if params.lossless else 0) | (FLAG_RGB if params.lossless else 0)
    flags |= FLAG_GROUP_PADDING if params.group_padding else 0
    flags |= FLAG_MULTIVIEW if params.mode == "multiview" else 0
    layout = atlas.layout
    header = StreamHeader(
        views, layout.canvas_width, layout.canvas_height, cloud.geom_bit_depth,
        cloud.attr_bit_depth, atlas.bbox.min, atlas.bbox.max, params.search_range,
        params.lambda_scale, params.qp_i, params.geometry_qp, flags, patch_table(atlas), structure,
    )
    occ_payload = code_occupancy(layout.occupancy)
    map_payload = code_patch_map(layout.patch_map, layout.occupancy)
    bitstream = write_container(
        header, occ_payload, map_payload, [UnitPayload(u.payload, u.bit_length) for u in units]
    )

    geom_bits = sum(8 * len(u.payload) for u in units[:2])
    attr_bits = sum(8 * len(u.payload) for u in units[2:])
    stats = {
        "points": len(cloud),
        "views": views,
        "patches": len(atlas.patches),
        "canvas_width": layout.canvas_width,
        "canvas_height": layout.canvas_height,
        "occupied_pixels": int(layout.occupancy.sum()),
        "missed_points": int(len(atlas.missed)),
        "occupancy_bits": 8 * (len(occ_payload) + len(map_payload)),
        "geometry_bits": geom_bits,
        "attribute_bits": attr_bits,
        "total_bits": 8 * len(bitstream),
        "mode": params.mode,
        "group_padding": "on" if params.group_padding else "off",
        "qp_i": params.qp_i,
        "qp_geom": params.geometry_qp,
    }
    for u, name in zip(units, ["geometry"] * 2 + ["attribute"] * (len(units) - 2)):
        stats[f"unit_bits.{name}.{u.view}.{u.frame}"] = 8 * len(u.payload)
    for k, v in timings.items():
        stats[f"time.{k}"] = round(v, 4)
    recon = {"geometry": geom_rec, "attributes": attr_rec}
    return EncodeResult(bitstream, stats, atlas, units, recon)


def decode_atlas(bitstream: bytes) -> tuple[DecodedAtlas, StreamHeader]:
    header, occ_payload, map_payload, payloads = read_container(bitstream)
    occupancy = decode_occupancy(occ_payload)
    if occupancy.shape != (header.height, header.width):
        raise BitstreamError("occupancy size disagrees with header", 0)
    patch_map = decode_patch_map(map_payload, occupancy)
    h, w, views = header.height, header.width, header.view_count

    geom_cfg = CodecConfig(search_range=header.search_range, lambda_scale=header.lambda_scale,
                           bit_depth=header.geom_bit_depth, lossless=header.lossless)
    attr_cfg = CodecConfig(search_range=header.search_range, lambda_scale=header.lambda_scale,
                           bit_depth=header.attr_bit_depth, lossless=header.lossless)
    geometry = np.zeros((2, h, w), np.int64)
    rec = {}
    for spec, p in zip(_geometry_specs(header.qp_geom), payloads[:2]):
        unit = EncodedUnit(spec.view, spec.frame, spec.qp, spec.slice_type, spec.refs,
                           h, w, 1, p.payload, p.bit_length)
        rec[(spec.view, spec.frame)] = decode_unit(unit, rec, geom_cfg)
        geometry[spec.frame] = rec[(spec.view, spec.frame)][..., 0]

    attributes = np.zeros((2, views, h, w, 3), np.int64)
    rec = {}
    for cu, p in zip(header.structure.units, payloads[2:]):
        unit = EncodedUnit(cu.view, cu.frame, cu.qp, cu.slice_type, cu.refs, h, w, 3,
                           p.payload, p.bit_length)
        rec[(cu.view, cu.frame)] = decode_unit(unit, rec, attr_cfg)
        attributes[cu.frame, cu.view] = rec[(cu.view, cu.frame)]
    if not header.rgb:
        attributes = ycbcr_to_rgb(attributes, header.attr_bit_depth)

    atlas = DecodedAtlas(
        occupancy, geometry, attributes, header.patches,
        BoundingBox(tuple(header.bbox_min), tuple(header.bbox_max)),
        header.geom_bit_depth, header.attr_bit_depth, patch_map,
    )
    return atlas, header


def decode_cloud(bitstream: bytes) -> PlenopticPointCloud:
    atlas, _ = decode_atlas(bitstream)
    return reconstruct_cloud(atlas)
