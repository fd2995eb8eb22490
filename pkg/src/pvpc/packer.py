"""First-fit raster-scan packing of patch footprints onto a shared canvas.

Rotation ``r`` turns a footprint ``r * 90`` degrees clockwise, i.e. the
rotated array is ``np.rot90(layer, k=-r)``. A patch-local pixel ``(u, v)``
of a ``w x h`` patch lands at canvas ``(x0 + x, y0 + y)`` with::

    r=0: (x, y) = (u, v)
    r=1: (x, y) = (h-1-v, u)
    r=2: (x, y) = (w-1-u, h-1-v)
    r=3: (x, y) = (v, w-1-u)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PatchTooWide

DEFAULT_CANVAS_WIDTH = 1280
DEFAULT_ALIGNMENT = 16


@dataclass(frozen=True)
class Placement:
    x: int
    y: int
    rotation: int


@dataclass
class AtlasLayout:
    canvas_width: int
    canvas_height: int
    placements: list
    occupancy: np.ndarray  # (H, W) uint8
    patch_map: np.ndarray  # (H, W) int, -1 where unoccupied


def rotate(array: np.ndarray, rotation: int) -> np.ndarray:
    """Rotate the leading two axes clockwise by ``rotation`` quarter turns."""
    return np.rot90(array, k=-rotation, axes=(0, 1))


def rotated_size(width: int, height: int, rotation: int) -> tuple[int, int]:
    return (height, width) if rotation % 2 else (width, height)


def to_canvas(u, v, width, height, rotation):
    if rotation == 0:
        return u, v
    if rotation == 1:
        return height - 1 - v, u
    if rotation == 2:
        return width - 1 - u, height - 1 - v
    return v, width - 1 - u


def from_canvas(x, y, width, height, rotation):
    """Inverse of :func:`to_canvas` (``x, y`` relative to the placement origin)."""
    if rotation == 0:
        return x, y
    if rotation == 1:
        return y, height - 1 - x
    if rotation == 2:
        return width - 1 - x, height - 1 - y
    return width - 1 - y, x


def packing_order(masks) -> list[int]:
    """Area-descending, then width-descending, then original index."""
    return sorted(
        range(len(masks)),
        key=lambda i: (-masks[i].shape[0] * masks[i].shape[1], -masks[i].shape[1], i),
    )


def pack_patches(
    masks,
    canvas_width: int = DEFAULT_CANVAS_WIDTH,
    alignment: int = DEFAULT_ALIGNMENT,
) -> AtlasLayout:
    """Place each boolean footprint mask (indexed ``[v, u]``) on the canvas.

    Collisions are tested on occupied cells only, so bounding rectangles of
    different patches may interlock.
    """
    if alignment < 1 or canvas_width % alignment:
        raise ValueError("alignment must divide canvas_width")
    masks = [np.asarray(m, dtype=bool) for m in masks]
    for i, m in enumerate(masks):
        if min(m.shape) > canvas_width:
            raise PatchTooWide(
                f"patch {i} is {m.shape[1]}x{m.shape[0]}, wider than canvas {canvas_width} "
                "in every rotation"
            )

    canvas = np.zeros((alignment, canvas_width), bool)
    patch_map = np.full((alignment, canvas_width), -1, np.int64)
    placements: list = [None] * len(masks)
    used_height = 0
    for i in packing_order(masks):
        rotations = [rotate(masks[i], r) for r in range(4)]
        y = 0
        placed = None
        while placed is None:
            need = y + max(m.shape[0] for m in rotations)
            if need > canvas.shape[0]:
                grow = max(need, 2 * canvas.shape[0]) - canvas.shape[0]
                canvas = np.vstack([canvas, np.zeros((grow, canvas_width), bool)])
                patch_map = np.vstack([patch_map, np.full((grow, canvas_width), -1, np.int64)])
            for x in range(0, canvas_width, alignment):
                for r, m in enumerate(rotations):
                    h, w = m.shape
                    if x + w > canvas_width:
                        continue
                    if not np.any(canvas[y:y + h, x:x + w] & m):
                        placed = (x, y, r)
                        break
                if placed:
                    break
            else:
                y += alignment
        x, y, r = placed
        m = rotations[r]
        h, w = m.shape
        canvas[y:y + h, x:x + w] |= m
        patch_map[y:y + h, x:x + w][m] = i
        placements[i] = Placement(x, y, r)
        used_height = max(used_height, y + h)

    height = max(alignment, -(-used_height // alignment) * alignment)
    if canvas.shape[0] < height:
        extra = height - canvas.shape[0]
        canvas = np.vstack([canvas, np.zeros((extra, canvas_width), bool)])
        patch_map = np.vstack([patch_map, np.full((extra, canvas_width), -1, np.int64)])
    return AtlasLayout(
        canvas_width,
        height,
        placements,
        canvas[:height].astype(np.uint8),
        patch_map[:height].copy(),
    )
