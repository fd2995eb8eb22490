"""Core point cloud types, bounding boxes and PCA normal estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, InsufficientPoints, InvalidCloud

DEFAULT_NORMAL_NEIGHBORS = 16
# Orientation ties: |n . (p - center)| within one voxel plus this fraction of
# |p - center|, i.e. the normal is nearly perpendicular to the center offset
# (planar regions through the center), where the sign would be noise.
ORIENTATION_TIE = 1.0
ORIENTATION_TIE_COS = 0.2


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PlenopticPointCloud:
    """Integer points, each carrying one RGB triplet per camera view.

    ``positions`` is ``(P, 3)`` int64 and ``colors`` is ``(P, N, 3)`` int64.
    Instances are validated on construction and their arrays are read-only.
    Use :meth:`from_arrays` to build from raw data that may hold duplicates.
    """

    positions: np.ndarray
    colors: np.ndarray
    geom_bit_depth: int = 10
    attr_bit_depth: int = 8

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=np.int64)
        if col.ndim != 3 or col.shape[0] != pos.shape[0] or col.shape[2] != 3:
            raise InvalidCloud(
                f"colors must have shape (points, views, 3), got {col.shape} "
                f"for {pos.shape[0]} points"
            )
        if col.shape[1] < 1:
            raise InvalidCloud("view count must be positive")
        if not 1 <= self.geom_bit_depth <= 24:
            raise InvalidCloud(f"geometry bit depth {self.geom_bit_depth} not in [1, 24]")
        if not 1 <= self.attr_bit_depth <= 16:
            raise InvalidCloud(f"attribute bit depth {self.attr_bit_depth} not in [1, 16]")
        if pos.size and (pos.min() < 0 or pos.max() >= 1 << self.geom_bit_depth):
            raise InvalidCloud("coordinate outside geometry bit depth")
        if col.size and (col.min() < 0 or col.max() >= 1 << self.attr_bit_depth):
            raise InvalidCloud("color component outside attribute bit depth")
        if len(pos) > 1 and len(np.unique(pos, axis=0)) != len(pos):
            raise InvalidCloud("duplicate coordinates; build with from_arrays to merge")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "colors", _frozen(col))

    @classmethod
    def from_arrays(cls, positions, colors, geom_bit_depth=10, attr_bit_depth=8):
        """Build a cloud, merging duplicate coordinates.

        Colors of merged points are averaged per view with round-half-up; the
        merged point keeps the position of the first occurrence in the order.
        """
        pos, col = merge_duplicates(positions, colors)
        return cls(pos, col, geom_bit_depth, attr_bit_depth)

    @classmethod
    def empty(cls, view_count=1, geom_bit_depth=10, attr_bit_depth=8):
        return cls(
            np.zeros((0, 3), np.int64),
            np.zeros((0, view_count, 3), np.int64),
            geom_bit_depth,
            attr_bit_depth,
        )

    @property
    def view_count(self) -> int:
        return self.colors.shape[1]

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlenopticPointCloud):
            return NotImplemented
        return (
            self.geom_bit_depth == other.geom_bit_depth
            and self.attr_bit_depth == other.attr_bit_depth
            and self.positions.shape == other.positions.shape
            and self.colors.shape == other.colors.shape
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.colors, other.colors)
        )

    __hash__ = None

    def sorted(self) -> "PlenopticPointCloud":
        """Copy with points in lexicographic (x, y, z) order."""
        order = lexsort_points(self.positions)
        return PlenopticPointCloud(
            self.positions[order], self.colors[order], self.geom_bit_depth, self.attr_bit_depth
        )

    def subset(self, indices) -> "PlenopticPointCloud":
        indices = np.asarray(indices, dtype=np.int64)
        return PlenopticPointCloud(
            self.positions[indices], self.colors[indices], self.geom_bit_depth, self.attr_bit_depth
        )


@dataclass(frozen=True)
class BoundingBox:
    min: tuple
    max: tuple

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.min, float) + np.asarray(self.max, float)) / 2.0

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points)
        return np.all((points >= np.asarray(self.min)) & (points <= np.asarray(self.max)), axis=1)


@dataclass(frozen=True, eq=False)
class NormalSet:
    """Unit normals aligned with a cloud's point order.

    ``degenerate`` flags points whose neighborhood had no well-defined plane;
    their normal is set to +z.
    """

    vectors: np.ndarray
    degenerate: np.ndarray

    def __len__(self) -> int:
        return len(self.vectors)


def lexsort_points(positions) -> np.ndarray:
    positions = np.asarray(positions)
    return np.lexsort((positions[:, 2], positions[:, 1], positions[:, 0]))


def merge_duplicates(positions, colors):
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 3)
    col = np.asarray(colors, dtype=np.int64)
    if len(pos) < 2:
        return pos, col
    _, first, inverse, counts = np.unique(
        pos, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    if len(first) == len(pos):
        return pos, col
    sums = np.zeros((len(first),) + col.shape[1:], np.int64)
    np.add.at(sums, inverse, col)
    c = counts.reshape(-1, 1, 1)
    merged = (sums + c // 2) // c
    order = np.argsort(first, kind="stable")
    return pos[first[order]], merged[order]


def compute_bounding_box(cloud: PlenopticPointCloud) -> BoundingBox:
    if len(cloud) == 0:
        raise EmptyCloud("cannot bound an empty cloud")
    lo = cloud.positions.min(axis=0)
    hi = cloud.positions.max(axis=0)
    return BoundingBox(tuple(int(v) for v in lo), tuple(int(v) for v in hi))


def estimate_normals(cloud: PlenopticPointCloud, k: int = DEFAULT_NORMAL_NEIGHBORS) -> NormalSet:
    """PCA plane-fit normals over each point's ``k``-point neighborhood.

    The neighborhood holds the point itself plus its ``k - 1`` nearest
    others. Points are processed in lexicographic coordinate order so that
    the result does not depend on the input ordering. Each eigenvector is
    first made canonical (largest-magnitude component positive) and then
    flipped to face away from the bounding-box center. A dot product with
    the center offset that is nearly zero (see ``ORIENTATION_TIE``) is a
    tie and keeps the canonical sign.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    n = len(cloud)
    if n < k:
        raise InsufficientPoints(f"{n} points, need at least {k}")
    order = lexsort_points(cloud.positions)
    pts = cloud.positions[order].astype(np.float64)
    _, nbr = cKDTree(pts).query(pts, k=k)
    nbr = nbr.reshape(n, k)
    local = pts[nbr]
    local -= local.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", local, local) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()

    scale = np.maximum(evals[:, 2], 1e-300)
    degenerate = (evals[:, 2] <= 0) | (evals[:, 1] <= 1e-10 * scale)
    normals[degenerate] = (0.0, 0.0, 1.0)

    big = np.argmax(np.abs(normals), axis=1)
    sign = np.sign(normals[np.arange(n), big])
    normals *= sign[:, None]
    bbox = compute_bounding_box(cloud)
    offset = pts - bbox.center
    facing = np.einsum("ni,ni->n", normals, offset)
    tie = ORIENTATION_TIE + ORIENTATION_TIE_COS * np.linalg.norm(offset, axis=1)
    normals[(facing < -tie) & ~degenerate] *= -1
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    out = np.empty_like(normals)
    out[order] = normals
    flags = np.empty(n, bool)
    flags[order] = degenerate
    return NormalSet(_frozen(out), _frozen(flags))


def nearest_neighbors(reference, queries) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest neighbor of each query among integer ``reference`` points.

    Returns ``(index, squared_distance)``; ties go to the lowest reference
    index. Distances are computed in integer arithmetic.
    """
    ref = np.asarray(reference, dtype=np.int64)
    qry = np.asarray(queries, dtype=np.int64)
    tree = cKDTree(ref.astype(np.float64))
    k = 2 if len(ref) > 1 else 1
    dist, idx = tree.query(qry.astype(np.float64), k=k)
    dist = dist.reshape(len(qry), k)
    idx = np.asarray(idx, dtype=np.int64).reshape(len(qry), k)
    best = idx[:, 0].copy()
    d2 = np.sum((ref[best] - qry) ** 2, axis=1)
    if k == 1:
        return best, d2
    # a tie is only possible where the runner-up sits at the same distance
    maybe = np.flatnonzero(dist[:, 1] <= dist[:, 0] + 1e-6)
    if len(maybe):
        radius = np.sqrt(d2[maybe].astype(np.float64)) + 1e-6
        groups = tree.query_ball_point(qry[maybe].astype(np.float64), radius)
        for q, cands in zip(maybe, groups):
            cands = np.asarray(cands, dtype=np.int64)
            cd = np.sum((ref[cands] - qry[q]) ** 2, axis=1)
            best[q] = cands[cd == cd.min()].min()
            d2[q] = cd.min()
    return best, d2
