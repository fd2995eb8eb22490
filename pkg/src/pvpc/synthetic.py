"""Deterministic synthetic plenoptic clouds for desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .model import PlenopticPointCloud, lexsort_points

SHAPES = ("cube", "sphere", "plane")
MARGIN = 4
TEXTURE_AMPLITUDE = 100.0
# per-view fields carry stronger contrast than the shared base, standing in
# for view-dependent shading; clipping happens after mixing
VIEW_AMPLITUDE = 200.0


def _cube(n):
    side = 2
    while 6 * side * side - 12 * side + 8 < n:
        side += 1
    g = np.indices((side,) * 3).reshape(3, -1).T
    surface = np.any((g == 0) | (g == side - 1), axis=1)
    return g[surface]


def _sphere(n):
    radius = 2.0
    while True:
        r = int(np.ceil(radius)) + 1
        g = np.indices((2 * r + 1,) * 3).reshape(3, -1).T - r
        d = np.sqrt((g * g).sum(axis=1))
        shell = g[(d >= radius - 0.5) & (d < radius + 0.5)]
        if len(shell) >= n:
            return shell - shell.min(axis=0)
        radius += 1.0


def _plane(n):
    side = int(np.ceil(np.sqrt(n)))
    g = np.indices((side, side)).reshape(2, -1).T
    z = np.floor(0.3 * g[:, 0] + 0.2 * g[:, 1] + 0.5).astype(np.int64)
    return np.column_stack([g, z])


def _texture(rng: np.random.Generator, pos: np.ndarray, extent: float,
             amplitude: float = TEXTURE_AMPLITUDE) -> np.ndarray:
    """Smooth random RGB field: a few random-direction sinusoids per channel."""
    out = np.zeros((len(pos), 3))
    for c in range(3):
        for _ in range(3):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            freq = rng.uniform(1.0, 4.0) * 2 * np.pi / extent
            phase = rng.uniform(0, 2 * np.pi)
            out[:, c] += np.sin(freq * pos @ direction + phase)
    return 128.0 + amplitude / 3.0 * out


def generate_synthetic(
    shape: str = "cube",
    point_count: int = 4000,
    view_count: int = 13,
    view_correlation: float = 0.9,
    seed: int = 0,
    geom_bit_depth: int = 10,
) -> PlenopticPointCloud:
    """Voxelised surface with per-view colors ``rho * base + (1 - rho) * own``.

    ``rho = 1`` makes every view identical; ``rho = 0`` gives each view an
    independent texture. The surface is the smallest of its family holding
    ``point_count`` voxels, truncated to exactly ``point_count`` points in
    lexicographic order.
    """
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    if point_count <= 0:
        raise ValueError("point_count must be positive")
    if view_count < 1:
        raise ValueError("view_count must be positive")
    if not 0.0 <= view_correlation <= 1.0:
        raise ValueError("view_correlation must be within [0, 1]")
    pts = {"cube": _cube, "sphere": _sphere, "plane": _plane}[shape](point_count)
    pts = pts[lexsort_points(pts)][:point_count] + MARGIN
    if pts.max() >= 1 << geom_bit_depth:
        raise ValueError("point_count too large for the geometry bit depth")

    rng = np.random.default_rng(seed)
    extent = float(pts.max() - pts.min() + 1)
    base = _texture(rng, pts, extent)
    colors = np.empty((len(pts), view_count, 3), np.int64)
    for k in range(view_count):
        own = _texture(rng, pts, extent, VIEW_AMPLITUDE)
        mixed = view_correlation * base + (1.0 - view_correlation) * own
        colors[:, k] = np.clip(np.floor(mixed + 0.5), 0, 255)
    return PlenopticPointCloud(pts, colors, geom_bit_depth, 8)
