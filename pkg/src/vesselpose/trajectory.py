"""Robot trajectory extraction from a skeleton.

Candidate paths are traced from boundary-adjacent endpoints with an
exhaustive branch-aware depth-first search; each candidate is scored on
length, smoothness and direction consistency, and the best weighted total
wins. The head of the winning path is its terminal point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import TrajectoryNotFoundError
from .grid import PixelGrid
from .skeleton import Skeleton

_NEIGHBOR_OFFSETS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


@dataclass(frozen=True)
class PixelPath:
    """An ordered simple path of 8-connected pixel coordinates."""

    points: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pts = tuple((int(x), int(y)) for x, y in self.points)
        if not pts:
            raise ValueError("a path needs at least one point")
        if len(set(pts)) != len(pts):
            raise ValueError("path revisits a point")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if max(abs(x1 - x0), abs(y1 - y0)) != 1:
                raise ValueError(f"points ({x0},{y0}) and ({x1},{y1}) are not 8-adjacent")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def start(self) -> tuple[int, int]:
        return self.points[0]

    @property
    def head(self) -> tuple[int, int]:
        return self.points[-1]


@dataclass(frozen=True)
class PathScores:
    """Per-candidate score breakdown; total is the weighted sum."""

    score_l: int
    score_s: float
    score_c: float
    total: float


@dataclass(frozen=True)
class TraceConfig:
    boundary_margin: int = 5
    max_depth: int = 4096
    weights: tuple[float, float, float] = (0.2, 0.4, 0.4)

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if len(self.weights) != 3 or not all(math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be three finite numbers")


def find_start_points(skel: Skeleton, cfg: TraceConfig = TraceConfig()) -> list[tuple[int, int]]:
    """Endpoints within boundary_margin of any image border.

    Falls back to all endpoints when none lie near a border, so an entirely
    interior skeleton can still be traced.
    """
    w, h = skel.grid.width, skel.grid.height
    m = cfg.boundary_margin
    near = [(x, y) for x, y in skel.endpoints if min(x, y, w - 1 - x, h - 1 - y) <= m]
    return near if near else list(skel.endpoints)


def _sorted_neighbors(cells, x: int, y: int) -> list[tuple[int, int]]:
    w = cells.shape[1]
    h = cells.shape[0]
    out = []
    for dy in (-1, 0, 1):
        ny = y + dy
        if 0 <= ny < h:
            for dx in (-1, 0, 1):
                nx = x + dx
                if (dx or dy) and 0 <= nx < w and cells[ny, nx]:
                    out.append((nx, ny))
    return out


def trace_paths(skel: Skeleton, start: tuple[int, int], cfg: TraceConfig = TraceConfig()) -> PixelPath:
    """Trace the longest simple path from start through the skeleton.

    Every branch is explored depth-first while a visited set blocks
    revisitation along the current path, so loops terminate; the longest
    branch wins. Ties go to the branch reached first in raster neighbor
    order. Path length is capped at cfg.max_depth points.
    """
    cells = skel.grid.cells
    x, y = start
    if not (0 <= x < skel.grid.width and 0 <= y < skel.grid.height and cells[y, x]):
        raise ValueError(f"start point {start} is not on the skeleton")

    path = [start]
    on_path = {start}
    iters = [iter(_sorted_neighbors(cells, x, y))]
    best = tuple(path)
    while iters:
        nxt = next(iters[-1], None)
        if nxt is None:
            iters.pop()
            on_path.discard(path.pop())
            continue
        if nxt in on_path or len(path) >= cfg.max_depth:
            continue
        path.append(nxt)
        on_path.add(nxt)
        iters.append(iter(_sorted_neighbors(cells, nxt[0], nxt[1])))
        if len(path) > len(best):
            best = tuple(path)
    return PixelPath(best)


def _mean_abs_cos_turns(pts) -> float:
    total = 0.0
    count = 0
    for i in range(len(pts) - 2):
        ax, ay = pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]
        bx, by = pts[i + 2][0] - pts[i + 1][0], pts[i + 2][1] - pts[i + 1][1]
        total += abs(ax * bx + ay * by) / (math.hypot(ax, ay) * math.hypot(bx, by))
        count += 1
    return total / count


def _mean_abs_cos_to_main(pts) -> float:
    mx, my = pts[-1][0] - pts[0][0], pts[-1][1] - pts[0][1]
    mnorm = math.hypot(mx, my)
    if mnorm == 0.0:
        return 0.0
    total = 0.0
    for i in range(len(pts) - 1):
        vx, vy = pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]
        total += abs(vx * mx + vy * my) / (math.hypot(vx, vy) * mnorm)
    return total / (len(pts) - 1)


def score_path(path: PixelPath, weights: tuple[float, float, float], length_term: float = 1.0) -> PathScores:
    """Score one candidate.

    score_l is the raw point count; score_s averages |cos| of the turn angle
    at each interior vertex (1.0 for paths too short to turn); score_c
    averages |cos| between each step and the start-to-end direction (0.0 when
    start and end coincide). length_term is the normalized, inverted length
    contribution, which callers scoring a whole candidate set must supply;
    for a lone path the min-max convention makes it 1.0.
    """
    pts = path.points
    score_s = 1.0 if len(pts) < 3 else _mean_abs_cos_turns(pts)
    score_c = 0.0 if len(pts) < 2 else _mean_abs_cos_to_main(pts)
    w_l, w_s, w_c = weights
    total = w_l * length_term + w_s * score_s + w_c * score_c
    return PathScores(score_l=len(pts), score_s=score_s, score_c=score_c, total=total)


def score_candidates(candidates: list[PixelPath], weights: tuple[float, float, float]) -> list[PathScores]:
    """Score a candidate set with lengths min-max normalized and inverted.

    Shorter candidates receive a larger length contribution; with a single
    candidate (or all lengths equal) the contribution is 1.0 for everyone.
    """
    lengths = [len(p) for p in candidates]
    lmin, lmax = min(lengths), max(lengths)
    span = lmax - lmin
    terms = [1.0 if span == 0 else 1.0 - (n - lmin) / span for n in lengths]
    return [score_path(p, weights, t) for p, t in zip(candidates, terms)]


def select_optimal_path(
    candidates: list[PixelPath], weights: tuple[float, float, float] = TraceConfig().weights
) -> tuple[PixelPath, tuple[int, int]]:
    """Pick the candidate with the highest total score; return it and its head.

    The head is the terminal point of the winning path. Exact ties are broken
    by the raster order of the head, then of the start point, then by length,
    making the result independent of candidate ordering.
    """
    if not candidates:
        raise TrajectoryNotFoundError("no trajectory candidates")
    scores = score_candidates(candidates, weights)

    def rank(item):
        path, s = item
        hx, hy = path.head
        sx, sy = path.start
        return (-s.total, (hy, hx), (sy, sx), len(path))

    best, _ = min(zip(candidates, scores), key=rank)
    return best, best.head
