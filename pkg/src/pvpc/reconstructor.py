"""Rebuild a plenoptic cloud from decoded occupancy, geometry and attribute frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import PatchInfo
from .errors import InconsistentAtlas
from .model import BoundingBox, PlenopticPointCloud
from .packer import from_canvas
from .patcher import TANGENTS, axis_dimension, coordinate_from_depth


@dataclass
class DecodedAtlas:
    """Decoded planes sharing one canvas.

    ``geometry`` is ``(2, H, W)`` (near, far) depth relative to each patch's
    depth offset and ``attributes`` is ``(2, N, H, W, 3)`` RGB. When
    ``patch_map`` is None, pixels are assigned to the lowest-indexed patch
    whose placed rectangle contains them.
    """

    occupancy: np.ndarray
    geometry: np.ndarray
    attributes: np.ndarray
    patches: list
    bbox: BoundingBox
    geom_bit_depth: int = 10
    attr_bit_depth: int = 8
    patch_map: np.ndarray | None = None


def _rect_patch_map(atlas: DecodedAtlas) -> np.ndarray:
    h, w = atlas.occupancy.shape
    out = np.full((h, w), -1, np.int64)
    for i in range(len(atlas.patches) - 1, -1, -1):
        p = atlas.patches[i]
        pw, ph = (p.height, p.width) if p.rotation % 2 else (p.width, p.height)
        out[p.y0:p.y0 + ph, p.x0:p.x0 + pw] = i
    return out


def emitted_point_count(atlas: DecodedAtlas) -> int:
    occ = atlas.occupancy.astype(bool)
    return int(occ.sum() + (atlas.geometry[1][occ] != atlas.geometry[0][occ]).sum())


def reconstruct_cloud(atlas: DecodedAtlas) -> PlenopticPointCloud:
    """Emit a near point per occupied pixel plus a far point where far != near.

    Canvas pixels are mapped back by undoing the rotation first, then the
    patch origin; positions outside the geometry range are clipped. Points
    landing on the same voxel are merged with per-view color averaging.
    """
    occ = np.asarray(atlas.occupancy).astype(bool)
    geometry = np.asarray(atlas.geometry, dtype=np.int64)
    attributes = np.asarray(atlas.attributes, dtype=np.int64)
    h, w = occ.shape
    if geometry.shape != (2, h, w) or attributes.shape[0] != 2 or attributes.shape[2:4] != (h, w):
        raise InconsistentAtlas("plane dimensions disagree with the occupancy map")
    views = attributes.shape[1]
    patch_map = atlas.patch_map if atlas.patch_map is not None else _rect_patch_map(atlas)

    ys, xs = np.nonzero(occ)
    labels = np.asarray(patch_map)[ys, xs]
    if labels.size and (labels.min() < 0 or labels.max() >= len(atlas.patches)):
        raise InconsistentAtlas("occupied pixel outside every patch")

    table = np.array(
        [[p.axis, p.rotation, p.x0, p.y0, p.width, p.height, p.u0, p.v0, p.depth_offset]
         for p in atlas.patches] or np.zeros((0, 9)),
        dtype=np.int64,
    ).reshape(-1, 9)
    axis, rot, x0, y0, pw, ph, u0, v0, d0 = table[labels].T
    lx, ly = xs - x0, ys - y0
    rw = np.where(rot % 2 == 1, ph, pw)
    rh = np.where(rot % 2 == 1, pw, ph)
    if np.any((lx < 0) | (ly < 0) | (lx >= rw) | (ly >= rh)):
        raise InconsistentAtlas("occupied pixel outside its patch footprint")

    u = np.empty_like(lx)
    v = np.empty_like(ly)
    for r in range(4):
        sel = rot == r
        u[sel], v[sel] = from_canvas(lx[sel], ly[sel], pw[sel], ph[sel], r)

    limit = (1 << atlas.geom_bit_depth) - 1
    layers = []
    for layer in (0, 1):
        depth = geometry[layer][ys, xs] + d0
        pos = np.zeros((len(ys), 3), np.int64)
        for a in range(6):
            sel = axis == a
            if not sel.any():
                continue
            dim = axis_dimension(a)
            t0, t1 = TANGENTS[dim]
            pos[sel, dim] = coordinate_from_depth(depth[sel], a, atlas.bbox)
            pos[sel, t0] = u[sel] + u0[sel]
            pos[sel, t1] = v[sel] + v0[sel]
        colors = np.moveaxis(attributes[layer][:, ys, xs], 0, 1)
        if layer == 1:
            keep = geometry[1][ys, xs] != geometry[0][ys, xs]
            pos, colors = pos[keep], colors[keep]
        layers.append((pos, colors))

    positions = np.clip(np.concatenate([layers[0][0], layers[1][0]]), 0, limit)
    colors = np.concatenate([layers[0][1], layers[1][1]]).reshape(-1, views, 3)
    colors = np.clip(colors, 0, (1 << atlas.attr_bit_depth) - 1)
    return PlenopticPointCloud.from_arrays(
        positions, colors, atlas.geom_bit_depth, atlas.attr_bit_depth
    )
