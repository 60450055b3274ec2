"""Pose parameters and state classification.

The robot head direction comes from a total-least-squares line fit of the
trailing window of its trajectory; the local vessel direction from a fit of
the vessel-skeleton stretch around the point nearest the head. Signed 2D
cross products of the vessel direction with the head/tail offsets give the
lateral distances, their sign XOR flags a centerline crossing, and the angle
between the two directions quantifies the heading deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, TrajectoryNotFoundError
from .grid import PixelGrid
from .trajectory import PixelPath

Point = tuple[float, float]


@dataclass(frozen=True)
class FittedSegment:
    """A fitted line: projected start/end, centroid, and a unit direction."""

    start: Point
    center: Point
    end: Point
    direction: Point

    def reversed(self) -> "FittedSegment":
        dx, dy = self.direction
        return FittedSegment(start=self.end, center=self.center, end=self.start, direction=(-dx, -dy))


@dataclass(frozen=True)
class PoseParameters:
    c_head: float
    c_tail: float
    d_head: float
    d_tail: float
    s: bool
    theta: float


@dataclass(frozen=True)
class PoseThresholds:
    d_allow: float = 10.0
    theta_allow: float = 15.0

    def __post_init__(self):
        if self.d_allow <= 0 or self.theta_allow <= 0:
            raise ValueError("thresholds must be > 0")


@dataclass(frozen=True)
class PoseState:
    label: str
    speed_hint: str
    steering_magnitude: float


def fit_segment(points) -> FittedSegment:
    """Total-least-squares line fit of 2D points.

    The direction is the principal axis of the point cloud, oriented from the
    first input point toward the last; start/end are the projections of the
    first/last points onto the fitted line, and the center is the centroid.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DegenerateInputError("line fitting needs at least 2 points")
    if np.unique(pts, axis=0).shape[0] < 2:
        raise DegenerateInputError("line fitting needs at least 2 distinct points")
    centroid = pts.mean(axis=0)
    delta = pts - centroid
    scatter = delta.T @ delta
    _, vecs = np.linalg.eigh(scatter)
    direction = vecs[:, -1]
    span = pts[-1] - pts[0]
    if float(direction @ span) < 0:
        direction = -direction
    start = centroid + float(delta[0] @ direction) * direction
    end = centroid + float(delta[-1] @ direction) * direction
    return FittedSegment(
        start=(float(start[0]), float(start[1])),
        center=(float(centroid[0]), float(centroid[1])),
        end=(float(end[0]), float(end[1])),
        direction=(float(direction[0]), float(direction[1])),
    )


def extract_head_segment(robot_path: PixelPath, window: int = 40) -> FittedSegment:
    """Fit the trailing `window` points of the trajectory, oriented tail-to-head."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(robot_path) < 2:
        raise DegenerateInputError("trajectory too short to fit a head direction")
    return fit_segment(robot_path.points[-min(window, len(robot_path)) :])


def head_window_start(robot_path: PixelPath, window: int = 40) -> tuple[int, int]:
    """First point of the fitted head window; used as the robot's tail end."""
    return robot_path.points[-min(window, len(robot_path))]


def _sorted_neighbors(cells, x: int, y: int):
    h, w = cells.shape
    return [
        (x + dx, y + dy)
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
        if (dx or dy) and 0 <= y + dy < h and 0 <= x + dx < w and cells[y + dy, x + dx]
    ]


def _walk(cells, origin, first, budget: float):
    """Follow the skeleton from origin through first, up to budget arc length.

    At junctions the branch minimizing the turn angle (maximizing the cosine
    with the incoming direction) continues the walk.
    """
    pts = [first]
    visited = {origin, first}
    length = math.hypot(first[0] - origin[0], first[1] - origin[1])
    prev, cur = origin, first
    while length < budget:
        cands = [n for n in _sorted_neighbors(cells, cur[0], cur[1]) if n not in visited]
        if not cands:
            break
        ix, iy = cur[0] - prev[0], cur[1] - prev[1]
        inorm = math.hypot(ix, iy)

        def turn_cos(n):
            vx, vy = n[0] - cur[0], n[1] - cur[1]
            return (vx * ix + vy * iy) / (math.hypot(vx, vy) * inorm)

        nxt = max(cands, key=lambda n: (turn_cos(n), (-n[1], -n[0])))
        pts.append(nxt)
        visited.add(nxt)
        length += math.hypot(nxt[0] - cur[0], nxt[1] - cur[1])
        prev, cur = cur, nxt
    return pts


def nearest_skeleton_point(vessel_skel: PixelGrid, point: Point) -> tuple[int, int]:
    """Skeleton pixel nearest to point; ties go to the smallest raster order."""
    ys, xs = np.nonzero(vessel_skel.cells)
    if ys.size == 0:
        raise TrajectoryNotFoundError("vessel skeleton is empty")
    d2 = (xs - point[0]) ** 2 + (ys - point[1]) ** 2
    idx = np.lexsort((xs, ys, d2))[0]
    return (int(xs[idx]), int(ys[idx]))


def extract_vessel_segment(
    vessel_skel: PixelGrid,
    head: Point,
    half_window: int = 20,
    travel: Point | None = None,
) -> FittedSegment:
    """Fit the vessel stretch of +-half_window arc pixels around the point nearest head.

    When a travel direction is given (the robot's overall start-to-head
    vector), the fitted direction is flipped if needed to point along it,
    giving a canonical orientation for the angle measurement.
    """
    if half_window < 1:
        raise ValueError("half_window must be >= 1")
    origin = nearest_skeleton_point(vessel_skel, head)
    cells = vessel_skel.cells
    nbrs = _sorted_neighbors(cells, origin[0], origin[1])
    if not nbrs:
        raise DegenerateInputError("vessel skeleton is a single pixel near the head")
    forward = _walk(cells, origin, nbrs[0], float(half_window))
    backward = []
    if len(nbrs) > 1:
        fx, fy = nbrs[0][0] - origin[0], nbrs[0][1] - origin[1]
        fnorm = math.hypot(fx, fy)

        def opposite_cos(n):
            vx, vy = n[0] - origin[0], n[1] - origin[1]
            return (vx * fx + vy * fy) / (math.hypot(vx, vy) * fnorm)

        second = min(nbrs[1:], key=lambda n: (opposite_cos(n), (n[1], n[0])))
        backward = _walk(cells, origin, second, float(half_window))
    pts = list(reversed(backward)) + [origin] + forward
    seg = fit_segment(pts)
    if travel is not None and seg.direction[0] * travel[0] + seg.direction[1] * travel[1] < 0:
        seg = seg.reversed()
    return seg


def cross2(u: Point, v: Point) -> float:
    """Scalar 2D cross product u_x*v_y - u_y*v_x."""
    return u[0] * v[1] - u[1] * v[0]


def compute_pose(robot_seg: FittedSegment, robot_tail_point: Point, vessel_seg: FittedSegment) -> PoseParameters:
    """Cross-product distances, crossing flag and heading angle.

    c_head/c_tail are signed cross products of the vessel direction with the
    head/tail offsets from the vessel segment center; with a unit vessel
    direction their magnitudes are the perpendicular distances to the vessel
    line. s is true when head and tail lie on opposite sides (sign XOR, zero
    counted as positive). theta is the angle between the direction vectors,
    in [0, 180] degrees.
    """
    u_v = vessel_seg.direction
    q = vessel_seg.center
    head = robot_seg.end
    c_head = cross2(u_v, (head[0] - q[0], head[1] - q[1]))
    c_tail = cross2(u_v, (robot_tail_point[0] - q[0], robot_tail_point[1] - q[1]))
    u_r = robot_seg.direction
    cos_theta = min(1.0, max(-1.0, u_r[0] * u_v[0] + u_r[1] * u_v[1]))
    return PoseParameters(
        c_head=c_head,
        c_tail=c_tail,
        d_head=abs(c_head),
        d_tail=abs(c_tail),
        s=(c_head >= 0) != (c_tail >= 0),
        theta=math.degrees(math.acos(cos_theta)),
    )


def classify_state(
    p: PoseParameters,
    t: PoseThresholds = PoseThresholds(),
    theta_max: float = 90.0,
    steering_scale: float = 1.0,
) -> PoseState:
    """Four-way pose state with speed hint and steering magnitude.

    A: both lateral distances under d_allow and theta under theta_allow; the
    trajectory is ideal, full speed, no steering. B: crossing with the head
    no farther out than the tail; keep direction, reduce speed. C: crossing
    with the head farther out; minimum speed, maximum steering. D: no
    crossing (head and tail on the same side); moderate speed with steering.
    Ties between B and C (equal distances) go to B. Steering for C/D is the
    heading angle clamped to theta_max and scaled.
    """
    if p.d_head < t.d_allow and p.d_tail < t.d_allow and p.theta < t.theta_allow:
        return PoseState(label="A", speed_hint="high", steering_magnitude=0.0)
    steering = min(p.theta, theta_max) * steering_scale
    if p.s and p.d_head <= p.d_tail:
        return PoseState(label="B", speed_hint="reduced", steering_magnitude=0.0)
    if p.s:
        return PoseState(label="C", speed_hint="minimum", steering_magnitude=steering)
    return PoseState(label="D", speed_hint="moderate", steering_magnitude=steering)


def pose_report(head: tuple[int, int], params: PoseParameters, state: PoseState) -> dict:
    """Per-frame pose report in the JSON wire layout."""
    return {
        "head": [int(head[0]), int(head[1])],
        "c_head": params.c_head,
        "c_tail": params.c_tail,
        "d_head": params.d_head,
        "d_tail": params.d_tail,
        "s": params.s,
        "theta_deg": params.theta,
        "state": state.label,
        "speed_hint": state.speed_hint,
        "steering_deg": state.steering_magnitude,
    }
