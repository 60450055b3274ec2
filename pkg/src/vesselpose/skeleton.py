"""Skeleton extraction, endpoint detection and gap repair.

Thinning reduces a cleaned binary mask to a 1-pixel-wide centerline while
keeping the original connectivity. Endpoints are foreground pixels with
exactly one foreground 8-neighbor; pairs of endpoints closer than a
configurable threshold are reconnected with a straight rasterized line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from skimage.morphology import skeletonize as _zhang_thin

from .grid import PixelGrid


@dataclass(frozen=True)
class Skeleton:
    """A thinned grid together with its endpoint pixels."""

    grid: PixelGrid
    endpoints: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class GapRepairConfig:
    """Maximum Euclidean endpoint distance below which a gap is bridged."""

    gap_threshold: float = 10.0

    def __post_init__(self):
        if self.gap_threshold < 0:
            raise ValueError("gap_threshold must be >= 0")


def detect_endpoints(skel: PixelGrid) -> list[tuple[int, int]]:
    """Return skeleton pixels with exactly one foreground 8-neighbor, in raster order.

    Neighbors outside the image count as background. The count is gathered
    only at foreground pixels, which keeps the cost proportional to the
    skeleton size rather than the image area.
    """
    ys, xs = np.nonzero(skel.cells)
    if ys.size == 0:
        return []
    padded = np.pad(skel.cells, 1)
    counts = np.zeros(ys.size, dtype=np.intp)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy or dx:
                counts += padded[ys + 1 + dy, xs + 1 + dx]
    keep = counts == 1
    return [(int(x), int(y)) for y, x in zip(ys[keep], xs[keep])]


def _ring_points(win: np.ndarray) -> list[tuple[int, int]]:
    return [(r, c) for r in range(3) for c in range(3) if win[r, c] and not (r == 1 and c == 1)]


def _is_simple(win: np.ndarray) -> bool:
    """8-simple test on a 3x3 window: deletion preserves local topology."""
    pts = _ring_points(win)
    if len(pts) < 2:
        return False  # endpoint or isolated pixel: keep
    if win[0, 1] and win[1, 0] and win[1, 2] and win[2, 1]:
        return False  # interior pixel: deleting it would open a hole
    seen = {pts[0]}
    stack = [pts[0]]
    while stack:
        r, c = stack.pop()
        for p in pts:
            if p not in seen and abs(p[0] - r) <= 1 and abs(p[1] - c) <= 1:
                seen.add(p)
                stack.append(p)
    return len(seen) == len(pts)


def _remove_square_blocks(cells: np.ndarray) -> np.ndarray:
    """Delete simple pixels until no fully-foreground 2x2 block remains."""
    padded = np.pad(cells, 1)
    while True:
        blocks = padded[:-1, :-1] & padded[1:, :-1] & padded[:-1, 1:] & padded[1:, 1:]
        ys, xs = np.nonzero(blocks)
        if ys.size == 0:
            break
        deleted = False
        for y, x in zip(ys, xs):
            for py, px in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
                if padded[py, px] and _is_simple(padded[py - 1 : py + 2, px - 1 : px + 2]):
                    padded[py, px] = False
                    deleted = True
        if not deleted:
            break
    return padded[1:-1, 1:-1]


def skeletonize(mask: PixelGrid) -> Skeleton:
    """Thin a cleaned mask to a unit-width skeleton and detect its endpoints.

    Uses two-subiteration (Zhang-Suen style) thinning followed by a
    topology-preserving sweep that removes any residual 2x2 blocks.
    """
    cells = _zhang_thin(mask.cells, method="zhang")
    cells = _remove_square_blocks(np.asarray(cells, dtype=bool))
    grid = PixelGrid(cells)
    return Skeleton(grid=grid, endpoints=tuple(detect_endpoints(grid)))


def bresenham_line(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer raster line from p0 to p1, inclusive of both endpoints."""
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    points = []
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def connect_gaps(skel: PixelGrid, cfg: GapRepairConfig = GapRepairConfig()) -> PixelGrid:
    """Bridge every endpoint pair closer than cfg.gap_threshold.

    Endpoints are detected once on the input; every qualifying pair is then
    connected with a straight rasterized line on a copy of the input, so all
    original skeleton pixels are preserved.
    """
    endpoints = detect_endpoints(skel)
    out = skel.cells.copy()
    for i in range(len(endpoints)):
        x0, y0 = endpoints[i]
        for j in range(i + 1, len(endpoints)):
            x1, y1 = endpoints[j]
            if math.hypot(x1 - x0, y1 - y0) < cfg.gap_threshold:
                for x, y in bresenham_line((x0, y0), (x1, y1)):
                    out[y, x] = True
    return PixelGrid(out)
