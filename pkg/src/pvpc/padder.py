"""Unoccupied-pixel padding: per-frame dilation, then cross-view group padding."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

GROUP_BLOCK_SIZE = 4


def dilate_pad(frames: np.ndarray, occupancy: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Fill unoccupied pixels by iterative 4-neighbor averaging.

    ``frames`` is ``(H, W)``, ``(H, W, C)`` or any stack ``(..., H, W, C)``
    sharing ``occupancy``; all frames are dilated together since the
    frontier depends only on the occupancy. Each pass assigns every empty
    pixel that touches a valued pixel the round-half-up mean of its valued
    4-neighbors from the previous pass. If nothing is occupied the frame is
    set to mid-gray.
    """
    occ = np.asarray(occupancy, dtype=bool)
    h, w = occ.shape
    arr = np.asarray(frames)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[..., None]
    lead = arr.shape[:-3]
    c = arr.shape[-1]
    out = arr.reshape((-1, h, w, c)).astype(np.int64, copy=True)

    if not occ.any():
        out[:] = 1 << (bit_depth - 1)
    else:
        # pass t fills exactly the pixels at taxicab distance t from the
        # occupied set, from their neighbors at distance t - 1
        dist = ndimage.distance_transform_cdt(~occ, metric="taxicab").ravel()
        flat = out.reshape(out.shape[0], h * w, c)
        order = np.argsort(dist, kind="stable")
        bounds = np.searchsorted(dist[order], np.arange(1, dist.max() + 2))
        for t in range(1, int(dist.max()) + 1):
            pix = order[bounds[t - 1]:bounds[t]]
            ys, xs = np.divmod(pix, w)
            total = np.zeros((flat.shape[0], len(pix), c), np.int64)
            n = np.zeros(len(pix), np.int64)
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny, nx = ys + dy, xs + dx
                ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                nb = np.where(ok, ny * w + nx, 0)
                ok &= dist[nb] < t
                total[:, ok] += flat[:, nb[ok]]
                n += ok
            flat[:, pix] = (total + (n // 2)[None, :, None]) // n[None, :, None]

    out = out.reshape(lead + (h, w, c))
    return out[..., 0] if squeeze else out


def find_group_paddable(occupancy: np.ndarray, block_size: int = GROUP_BLOCK_SIZE) -> np.ndarray:
    """Pixels whose ``block_size`` window is entirely unoccupied.

    The window is anchored so the pixel sits at offset
    ``ceil(block_size / 2) - 1`` along both axes; for a block of 4 that is
    rows/columns ``p-1 .. p+2``. Cells outside the canvas count as
    unoccupied.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    occ = np.asarray(occupancy, dtype=bool)
    h, w = occ.shape
    before = -(-block_size // 2) - 1
    after = block_size - 1 - before
    padded = np.pad(occ.astype(np.int64), ((before, after), (before, after)))
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), np.int64)
    integral[1:, 1:] = padded.cumsum(0).cumsum(1)
    b = block_size
    window = integral[b:b + h, b:b + w] - integral[:h, b:b + w] - integral[b:b + h, :w] + integral[:h, :w]
    return window == 0


def group_pad(stack: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    """Unify eligible pixels across all frames and views.

    ``stack`` has shape ``(2, N, H, W, C)`` indexed ``[frame, view]`` and
    must already be fully valued. Each eligible position receives, in every
    frame, the round-half-up mean of all ``2N`` values there.
    """
    arr = np.asarray(stack, dtype=np.int64)
    if arr.ndim == 4:
        arr = arr[..., None]
    frames, views = arr.shape[:2]
    count = frames * views
    mask = np.asarray(eligible, dtype=bool)
    out = arr.copy()
    total = arr[:, :, mask].sum(axis=(0, 1))
    out[:, :, mask] = (total + count // 2) // count
    return out.reshape(np.shape(stack))
