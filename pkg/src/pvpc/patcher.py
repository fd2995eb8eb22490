"""Normal-based patch segmentation and two-layer patch projection.

Axis codes index ``AXES``: 0=+x, 1=-x, 2=+y, 3=-y, 4=+z, 5=-z. A patch
projected along axis ``a`` uses the other two coordinates, in increasing
coordinate order, as its ``(u, v)`` footprint. Depth is measured from the
bounding-box face the axis points at: for ``+x`` it is ``max.x - x``, for
``-x`` it is ``x - min.x``, so the near layer is the surface facing outward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EmptyCloud
from .model import BoundingBox, NormalSet, PlenopticPointCloud, compute_bounding_box

AXES = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64
)
TANGENTS = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
EMPTY = -1

_OFFSETS_26 = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
     if (dx, dy, dz) > (0, 0, 0)],
    dtype=np.int64,
)


@dataclass(frozen=True)
class SegmentationParams:
    normal_angle_threshold: float = 60.0
    min_patch_points: int = 16
    surface_thickness: int = 4
    refinement_iterations: int = 2
    refine_neighbors: int = 16
    refine_weight: float = 3.0

    def __post_init__(self):
        for name in ("normal_angle_threshold", "min_patch_points", "surface_thickness",
                     "refinement_iterations", "refine_neighbors", "refine_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Patch:
    """A point cluster and, once projected, its two depth layers.

    Layer arrays are indexed ``[v, u]``. ``near_index``/``far_index`` hold
    the cloud point index stored in each cell (``EMPTY`` when unoccupied);
    ``attributes`` has shape ``(2, N, height, width, 3)`` for (layer, view).
    """

    axis: int
    point_indices: np.ndarray
    tangent_offset: tuple = (0, 0)
    depth_offset: int = 0
    size: tuple = (0, 0)  # (width, height)
    near: np.ndarray | None = None
    far: np.ndarray | None = None
    near_index: np.ndarray | None = None
    far_index: np.ndarray | None = None
    attributes: np.ndarray | None = None
    missed: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def width(self) -> int:
        return self.size[0]

    @property
    def height(self) -> int:
        return self.size[1]

    @property
    def occupancy(self) -> np.ndarray:
        return self.near != EMPTY


def axis_dimension(axis: int) -> int:
    return axis // 2


def depth_of(coords: np.ndarray, axis: int, bbox: BoundingBox) -> np.ndarray:
    dim = axis_dimension(axis)
    if axis % 2 == 0:
        return bbox.max[dim] - coords[..., dim]
    return coords[..., dim] - bbox.min[dim]


def coordinate_from_depth(depth: np.ndarray, axis: int, bbox: BoundingBox) -> np.ndarray:
    dim = axis_dimension(axis)
    if axis % 2 == 0:
        return bbox.max[dim] - depth
    return bbox.min[dim] + depth


def best_axis(normals: np.ndarray) -> np.ndarray:
    """Index of the face normal with the largest dot product; ties keep the lower index."""
    return np.argmax(np.atleast_2d(normals) @ AXES.T, axis=1)


def segment_into_patches(
    cloud: PlenopticPointCloud,
    normals: NormalSet,
    params: SegmentationParams = SegmentationParams(),
) -> tuple[list[Patch], np.ndarray]:
    """Cluster points into normal-coherent, 26-connected patches.

    Returns ``(patches, residual)`` where ``residual`` lists point indices
    in components smaller than ``min_patch_points``. Patches carry only
    axis and point indices; see :func:`project_patch`.
    """
    n = len(cloud)
    if n == 0:
        raise EmptyCloud("cannot segment an empty cloud")
    vectors = np.asarray(normals.vectors, dtype=np.float64)
    pos = cloud.positions
    scores = vectors @ AXES.T
    labels = np.argmax(scores, axis=1)

    if n > 1:
        k = min(params.refine_neighbors, n - 1)
        _, nbr = cKDTree(pos.astype(np.float64)).query(pos.astype(np.float64), k=k + 1)
        nbr = nbr[:, 1:]
        for _ in range(params.refinement_iterations):
            votes = np.zeros((n, 6))
            for j in range(6):
                votes[:, j] = np.mean(labels[nbr] == j, axis=1)
            labels = np.argmax(scores + params.refine_weight * votes, axis=1)

    comp = _connected_components(pos, labels, vectors, params.normal_angle_threshold)
    patches = []
    residual = []
    # component ids are assigned in order of their lowest point index
    for members in _group(comp):
        if len(members) < params.min_patch_points:
            residual.append(members)
            continue
        axis = int(best_axis(vectors[members].mean(axis=0))[0])
        patches.append(Patch(axis=axis, point_indices=members))
    residual = np.sort(np.concatenate(residual)) if residual else np.zeros(0, np.int64)
    return patches, residual


def _connected_components(pos, labels, vectors, angle_deg):
    n = len(pos)
    lo = pos.min(axis=0)
    span = pos.max(axis=0) - lo + 3
    keyed = pos - lo + 1
    keys = (keyed[:, 0] * span[1] + keyed[:, 1]) * span[2] + keyed[:, 2]
    order = np.argsort(keys)
    sorted_keys = keys[order]
    cos_limit = np.cos(np.deg2rad(angle_deg))
    rows, cols = [], []
    for off in _OFFSETS_26:
        target = ((keyed[:, 0] + off[0]) * span[1] + keyed[:, 1] + off[1]) * span[2] + keyed[:, 2] + off[2]
        slot = np.searchsorted(sorted_keys, target)
        slot = np.minimum(slot, n - 1)
        hit = sorted_keys[slot] == target
        src = np.flatnonzero(hit)
        dst = order[slot[hit]]
        keep = (labels[src] == labels[dst]) & (
            np.einsum("ij,ij->i", vectors[src], vectors[dst]) >= cos_limit - 1e-12
        )
        rows.append(src[keep])
        cols.append(dst[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    return comp


def _group(comp):
    order = np.argsort(comp, kind="stable")
    bounds = np.flatnonzero(np.diff(comp[order])) + 1
    groups = np.split(order, bounds)
    groups.sort(key=lambda g: g[0])
    return groups


def project_patch(
    cloud: PlenopticPointCloud,
    patch: Patch,
    surface_thickness: int = 4,
    bbox: BoundingBox | None = None,
) -> Patch:
    """Rasterise a patch into near/far depth layers with per-view colors.

    Points that are neither the nearest point of their pixel nor the
    deepest point within ``surface_thickness`` of it are reported in
    ``missed``.
    """
    idx = np.asarray(patch.point_indices, dtype=np.int64)
    if len(idx) == 0:
        raise ValueError("patch has no points")
    bbox = bbox or compute_bounding_box(cloud)
    pts = cloud.positions[idx]
    t0, t1 = TANGENTS[axis_dimension(patch.axis)]
    depth = depth_of(pts, patch.axis, bbox)
    u0, v0 = int(pts[:, t0].min()), int(pts[:, t1].min())
    u = pts[:, t0] - u0
    v = pts[:, t1] - v0
    d0 = int(depth.min())
    rel = depth - d0
    width, height = int(u.max()) + 1, int(v.max()) + 1

    # sort by pixel, then depth: first in each pixel run is the near point
    pix = v * width + u
    order = np.lexsort((rel, pix))
    pix_s, rel_s = pix[order], rel[order]
    starts = np.flatnonzero(np.r_[True, pix_s[1:] != pix_s[:-1]])
    run_id = np.cumsum(np.r_[True, pix_s[1:] != pix_s[:-1]]) - 1
    near_rel = rel_s[starts][run_id]
    in_band = rel_s <= near_rel + surface_thickness
    # last in-band point of each run is the far point
    band_pos = np.where(in_band, np.arange(len(order)), -1)
    far_pos = np.full(len(starts), -1)
    np.maximum.at(far_pos, run_id, band_pos)

    near_pts = order[starts]
    far_pts = order[far_pos]
    used = np.zeros(len(idx), bool)
    used[near_pts] = True
    used[far_pts] = True

    near = np.full((height, width), EMPTY, np.int64)
    far = np.full((height, width), EMPTY, np.int64)
    near_index = np.full((height, width), EMPTY, np.int64)
    far_index = np.full((height, width), EMPTY, np.int64)
    near[v[near_pts], u[near_pts]] = rel[near_pts]
    far[v[near_pts], u[near_pts]] = rel[far_pts]
    near_index[v[near_pts], u[near_pts]] = idx[near_pts]
    far_index[v[near_pts], u[near_pts]] = idx[far_pts]

    views = cloud.view_count
    attributes = np.zeros((2, views, height, width, 3), np.int64)
    occ = near_index != EMPTY
    attributes[0][:, occ] = np.moveaxis(cloud.colors[near_index[occ]], 0, 1)
    attributes[1][:, occ] = np.moveaxis(cloud.colors[far_index[occ]], 0, 1)

    return Patch(
        axis=patch.axis,
        point_indices=idx,
        tangent_offset=(u0, v0),
        depth_offset=d0,
        size=(width, height),
        near=near,
        far=far,
        near_index=near_index,
        far_index=far_index,
        attributes=attributes,
        missed=np.sort(idx[~used]),
    )


def generate_patches(
    cloud: PlenopticPointCloud,
    normals: NormalSet,
    params: SegmentationParams = SegmentationParams(),
) -> tuple[list[Patch], np.ndarray]:
    """Segment and project; returns projected patches and all missed point indices."""
    bbox = compute_bounding_box(cloud)
    raw, residual = segment_into_patches(cloud, normals, params)
    patches = [project_patch(cloud, p, params.surface_thickness, bbox) for p in raw]
    missed = [residual] + [p.missed for p in patches]
    return patches, np.sort(np.concatenate(missed)).astype(np.int64)
