"""Synthetic vessel/robot mask generator with analytic ground truth.

A phantom is a smooth vessel centerline (cubic spline through control
points) dilated to a tube, plus a robot curve that runs inside the tube from
the image border and ends in a straight head piece with a prescribed
perpendicular offset and heading angle. Because the head piece is straight,
the true heading deviation and head distance are the requested angle and
offset by construction, independent of any measurement code.

Defect injection reproduces common segmentation failure modes on a mask:
gaps across the curve, grafted spurious branches, disconnected outlier
segments, and small speckle blobs. A corpus writer emits mask files, pseudo
grayscale frames and a JSON-lines manifest with per-record ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .errors import PhantomSpecError
from .grid import PixelGrid, save_gray, save_mask
from .pose import PoseParameters, PoseThresholds, classify_state, fit_segment
from .serialize import to_jsonable, write_jsonl
from .skeleton import skeletonize

DEFECT_KINDS = ("gap", "branch", "outlier", "speckle")

# Arc-length step of the dense centerline sampling.
_ARC_STEP = 0.25


@dataclass(frozen=True)
class PhantomSpec:
    """Full description of one phantom; all geometry is explicit and the
    seed only drives defect placement and frame noise."""

    image_size: tuple[int, int]
    vessel_control_points: tuple[tuple[float, float], ...]
    vessel_radius: float
    robot_offset: float
    robot_angle: float
    robot_length: float
    head_length: float = 60.0
    robot_radius: float = 1.8
    defects: tuple[dict, ...] = ()
    seed: int = 0

    def __post_init__(self):
        w, h = self.image_size
        if w < 32 or h < 32:
            raise PhantomSpecError("image_size must be at least 32x32")
        object.__setattr__(self, "image_size", (int(w), int(h)))
        cps = tuple((float(x), float(y)) for x, y in self.vessel_control_points)
        if len(cps) < 2:
            raise PhantomSpecError("need at least 2 vessel control points")
        object.__setattr__(self, "vessel_control_points", cps)
        if self.vessel_radius <= 0 or self.robot_radius <= 0:
            raise PhantomSpecError("radii must be > 0")
        if abs(self.robot_offset) >= self.vessel_radius:
            raise PhantomSpecError("|robot_offset| must be < vessel_radius")
        if self.head_length <= 0 or self.robot_length <= self.head_length:
            raise PhantomSpecError("robot_length must exceed head_length")
        defects = tuple(dict(d) for d in self.defects)
        for d in defects:
            _validate_defect(d)
        object.__setattr__(self, "defects", defects)
        if not 0 <= int(self.seed) < 2**64:
            raise PhantomSpecError("seed must fit in 64 bits")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class PhantomTruth:
    head: tuple[float, float]
    theta_true: float
    d_head_true: float
    d_tail_true: float
    s_true: bool
    state_true: str


def _validate_defect(d: dict):
    kind = d.get("kind")
    if kind == "gap" or kind == "branch":
        if not d.get("length", 0) > 0:
            raise PhantomSpecError(f"{kind} defect needs a positive length")
    elif kind == "outlier":
        if not d.get("area", 0) > 0:
            raise PhantomSpecError("outlier defect needs a positive area")
    elif kind == "speckle":
        if not int(d.get("count", 0)) > 0:
            raise PhantomSpecError("speckle defect needs a positive count")
    else:
        raise PhantomSpecError(f"unknown defect kind {kind!r}")


class _Centerline:
    """Arc-length parameterized centerline with tangents and normals."""

    def __init__(self, control_points):
        cps = np.asarray(control_points, dtype=float)
        chord = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(cps, axis=0), axis=1))))
        if np.any(np.diff(chord) <= 0):
            raise PhantomSpecError("vessel control points must be pairwise distinct")
        spline = CubicSpline(chord, cps, bc_type="natural", axis=0)
        u = np.linspace(0.0, chord[-1], max(int(chord[-1] / 0.05), 64))
        raw = spline(u)
        s_raw = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(raw, axis=0), axis=1))))
        self.length = float(s_raw[-1])
        self.s = np.arange(0.0, self.length, _ARC_STEP)
        u_of_s = np.interp(self.s, s_raw, u)
        self.points = spline(u_of_s)
        d1 = spline(u_of_s, 1)
        norms = np.linalg.norm(d1, axis=1)
        self.tangents = d1 / norms[:, None]
        self.normals = np.stack([-self.tangents[:, 1], self.tangents[:, 0]], axis=1)
        d2 = spline(u_of_s, 2)
        self._curvature = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / norms**3

    def min_curve_radius(self) -> float:
        k = float(self._curvature.max())
        return math.inf if k == 0 else 1.0 / k

    def at(self, arc):
        """Interpolated (points, tangents, normals) at arc positions."""
        arcs = np.atleast_1d(np.asarray(arc, dtype=float))
        px = np.interp(arcs, self.s, self.points[:, 0])
        py = np.interp(arcs, self.s, self.points[:, 1])
        tx = np.interp(arcs, self.s, self.tangents[:, 0])
        ty = np.interp(arcs, self.s, self.tangents[:, 1])
        t = np.stack([tx, ty], axis=1)
        t /= np.linalg.norm(t, axis=1)[:, None]
        n = np.stack([-t[:, 1], t[:, 0]], axis=1)
        return np.stack([px, py], axis=1), t, n

    def at_one(self, arc: float):
        p, t, n = self.at(arc)
        return p[0], t[0], n[0]


def _rasterize(points, size, clip: bool):
    """Mark the nearest pixel of each sample; optionally drop outside points."""
    w, h = size
    ij = np.rint(np.asarray(points, dtype=float)).astype(int)
    inside = (ij[:, 0] >= 0) & (ij[:, 0] < w) & (ij[:, 1] >= 0) & (ij[:, 1] < h)
    if not clip and not inside.all():
        raise PhantomSpecError("curve leaves the image")
    ij = ij[inside]
    if ij.shape[0] == 0:
        raise PhantomSpecError("curve lies entirely outside the image")
    cells = np.zeros((h, w), dtype=bool)
    cells[ij[:, 1], ij[:, 0]] = True
    return cells


def _dilate(curve_cells, radius: float):
    return ndimage.distance_transform_edt(~curve_cells) <= radius


def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def generate(
    spec: PhantomSpec,
    thresholds: PoseThresholds = PoseThresholds(),
    tail_arc: float = 47.6,
) -> tuple[PixelGrid, PixelGrid, PhantomTruth]:
    """Render the vessel and robot masks and compute the analytic truth.

    tail_arc is the arc distance from the head at which the reference tail
    point sits; it must lie on the straight head piece. The truth state is
    classify_state applied to the analytic parameters under the given
    thresholds. Raises a spec error if the robot escapes the vessel or the
    image.
    """
    w, h = spec.image_size
    cl = _Centerline(spec.vessel_control_points)
    vessel_cells = _dilate(_rasterize(cl.points, spec.image_size, clip=True), spec.vessel_radius)

    inside = (
        (cl.points[:, 0] >= 1.0)
        & (cl.points[:, 0] <= w - 2.0)
        & (cl.points[:, 1] >= 1.0)
        & (cl.points[:, 1] <= h - 2.0)
    )
    if not inside.any():
        raise PhantomSpecError("vessel centerline never enters the image")
    s_entry = float(cl.s[int(np.argmax(inside))])

    a = math.radians(spec.robot_angle)
    s_b = s_entry + spec.robot_length - spec.head_length
    s0 = s_b + spec.head_length * math.cos(a)
    if s0 + 25.0 > cl.length or s_b <= s_entry + 5.0:
        raise PhantomSpecError("robot does not fit along the vessel")
    c0, t0, n0 = cl.at_one(s0)
    head = c0 + spec.robot_offset * n0
    u_r = math.cos(a) * t0 + math.sin(a) * n0
    piece_start = head - spec.head_length * u_r

    # Anchor the body end exactly where the straight piece begins.
    near = (cl.s >= s_b - 25.0) & (cl.s <= s_b + 25.0)
    idx = np.nonzero(near)[0]
    j = idx[np.argmin(((cl.points[idx] - piece_start) ** 2).sum(axis=1))]
    s_bp = float(cl.s[j])
    lam_b = float((piece_start - cl.points[j]) @ cl.normals[j])
    if s_bp <= s_entry + 5.0:
        raise PhantomSpecError("robot body is too short")

    body_s = np.arange(s_entry, s_bp, 0.5)
    bp, _, bn = cl.at(body_s)
    blend = _smoothstep((body_s - s_entry) / (s_bp - s_entry)) * lam_b
    body_pts = bp + blend[:, None] * bn
    # End the centerline exactly at the head: the dilation cap reaches one
    # radius further and thinning retracts about as much, so the skeleton
    # tip lands on the head.
    head_t = np.arange(0.0, spec.head_length + 1e-9, _ARC_STEP)
    head_pts = piece_start[None, :] + head_t[:, None] * u_r[None, :]
    robot_cells = _dilate(
        _rasterize(np.vstack([body_pts, head_pts]), spec.image_size, clip=False),
        spec.robot_radius,
    )
    if np.any(robot_cells & ~vessel_cells):
        raise PhantomSpecError("robot mask escapes the vessel")

    if not 0.0 < tail_arc < spec.head_length:
        raise PhantomSpecError("tail_arc must lie on the straight head piece")
    c_head = spec.robot_offset
    c_tail = spec.robot_offset - tail_arc * math.sin(a)
    params = PoseParameters(
        c_head=c_head,
        c_tail=c_tail,
        d_head=abs(c_head),
        d_tail=abs(c_tail),
        s=(c_head >= 0) != (c_tail >= 0),
        theta=abs(spec.robot_angle),
    )
    truth = PhantomTruth(
        head=(float(head[0]), float(head[1])),
        theta_true=abs(spec.robot_angle),
        d_head_true=abs(c_head),
        d_tail_true=abs(c_tail),
        s_true=params.s,
        state_true=classify_state(params, thresholds).label,
    )
    return PixelGrid(vessel_cells), PixelGrid(robot_cells), truth


def render_frame(vessel_mask: PixelGrid, robot_mask: PixelGrid, seed: int, noise_sigma: float = 6.0) -> np.ndarray:
    """Pseudo grayscale frame: textured background, dark lumen, bright robot.

    Deterministic under the seed. With noise_sigma 0 every vessel pixel is
    strictly darker than the background mean.
    """
    if vessel_mask.cells.shape != robot_mask.cells.shape:
        raise ValueError("vessel and robot masks must share dimensions")
    h, w = vessel_mask.cells.shape
    rng = np.random.default_rng(seed)
    texture = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma=16.0)
    scale = float(texture.std())
    if scale > 0:
        texture *= 10.0 / scale
    background = 150.0 + texture
    img = background.copy()
    img[vessel_mask.cells] = background[vessel_mask.cells] * 0.55
    img[robot_mask.cells] = 232.0
    if noise_sigma > 0:
        img += rng.normal(0.0, noise_sigma, size=(h, w))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# --- defect injection ---------------------------------------------------


def _changed_meta(kind: str, before, after, extra: dict) -> dict:
    changed = before != after
    ys, xs = np.nonzero(changed)
    bbox = [int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())] if ys.size else None
    return {"kind": kind, "bbox": bbox, "pixels_changed": int(changed.sum()), **extra}


def _curve_positions(cells, rng, protect, endpoint_clear: float):
    """Shuffled on-curve positions clear of protected zones and endpoints."""
    sk = skeletonize(PixelGrid(cells))
    ys, xs = np.nonzero(sk.grid.cells)
    pts = np.stack([xs, ys], axis=1).astype(float)
    keep = np.ones(len(pts), dtype=bool)
    for px, py, radius in protect:
        keep &= np.hypot(pts[:, 0] - px, pts[:, 1] - py) >= radius
    for ex, ey in sk.endpoints:
        keep &= np.hypot(pts[:, 0] - ex, pts[:, 1] - ey) >= endpoint_clear
    pts = pts[keep]
    if len(pts) == 0:
        return pts
    return pts[rng.permutation(len(pts))]


def _local_direction(cells, center):
    sk = skeletonize(PixelGrid(cells))
    ys, xs = np.nonzero(sk.grid.cells)
    near = np.hypot(xs - center[0], ys - center[1]) <= 6.0
    seg = fit_segment(np.stack([xs[near], ys[near]], axis=1))
    return np.asarray(seg.direction)


def _apply_gap(cells, rng, length: float, protect):
    if length >= min(cells.shape):
        raise PhantomSpecError("gap longer than the mask")
    positions = _curve_positions(cells, rng, protect, endpoint_clear=18.0)
    if len(positions) == 0:
        raise PhantomSpecError("no room to place a gap")
    center = positions[0]
    tangent = _local_direction(cells, center)
    out = cells.copy()
    h, w = cells.shape
    reach = length / 2.0 + 9.0
    x0, x1 = max(0, int(center[0] - reach)), min(w, int(center[0] + reach) + 1)
    y0, y1 = max(0, int(center[1] - reach)), min(h, int(center[1] + reach) + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dx, dy = xx - center[0], yy - center[1]
    along = np.abs(dx * tangent[0] + dy * tangent[1])
    band = (along <= length / 2.0) & (np.hypot(dx, dy) <= length / 2.0 + 8.0)
    out[y0:y1, x0:x1] &= ~band
    return out, _changed_meta("gap", cells, out, {"length": float(length), "center": [float(center[0]), float(center[1])]})


def _rotate(v, angle: float):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _apply_branch(cells, rng, length: float, protect):
    if length >= min(cells.shape):
        raise PhantomSpecError("branch longer than the mask")
    positions = _curve_positions(cells, rng, protect, endpoint_clear=10.0)
    h, w = cells.shape
    for base in positions[:40]:
        tangent = _local_direction(cells, base)
        normal = np.array([-tangent[1], tangent[0]])
        direction = _rotate(normal * (1.0 if rng.random() < 0.5 else -1.0), rng.uniform(-0.5, 0.5))
        bend = rng.uniform(-0.25, 0.25)
        t = np.arange(0.0, length, _ARC_STEP)
        perp = np.array([-direction[1], direction[0]])
        pts = base[None, :] + t[:, None] * direction[None, :] + (bend * t**2 / length)[:, None] * perp[None, :]
        # Keep the graft interior so it cannot add a border endpoint.
        if np.any(pts < 8.0) or np.any(pts[:, 0] > w - 9.0) or np.any(pts[:, 1] > h - 9.0):
            continue
        out = cells | _dilate(_rasterize(pts, (w, h), clip=False), 1.3)
        return out, _changed_meta(
            "branch", cells, out, {"length": float(length), "base": [float(base[0]), float(base[1])]}
        )
    raise PhantomSpecError("no room to place a branch")


def _apply_outlier(cells, rng, area: float, protect):
    h, w = cells.shape
    tube_r = 1.3
    length = max(6.0, float(area) / 3.1)
    distance = ndimage.distance_transform_edt(~cells)
    for _ in range(200):
        center = np.array([rng.uniform(10, w - 11), rng.uniform(10, h - 11)])
        direction = _rotate(np.array([1.0, 0.0]), rng.uniform(0.0, 2.0 * math.pi))
        bend = rng.uniform(-0.2, 0.2)
        t = np.arange(0.0, length, _ARC_STEP) - length / 2.0
        perp = np.array([-direction[1], direction[0]])
        pts = center[None, :] + t[:, None] * direction[None, :] + (bend * t**2 / length)[:, None] * perp[None, :]
        if np.any(pts < 8.0) or np.any(pts[:, 0] > w - 9.0) or np.any(pts[:, 1] > h - 9.0):
            continue
        ij = np.rint(pts).astype(int)
        # Far enough from the existing mask that gap repair cannot bridge it.
        if np.min(distance[ij[:, 1], ij[:, 0]]) < 14.0:
            continue
        out = cells | _dilate(_rasterize(pts, (w, h), clip=False), tube_r)
        return out, _changed_meta("outlier", cells, out, {"area": float(area), "center": [float(center[0]), float(center[1])]})
    raise PhantomSpecError("no room to place an outlier segment")


def _apply_speckle(cells, rng, count: int, protect):
    h, w = cells.shape
    distance = ndimage.distance_transform_edt(~cells)
    out = cells.copy()
    placed = []
    attempts = 0
    while len(placed) < count and attempts < 200 * count:
        attempts += 1
        r = int(rng.integers(1, 4))
        cx, cy = rng.uniform(4, w - 5), rng.uniform(4, h - 5)
        if distance[int(round(cy)), int(round(cx))] < r + 5.0:
            continue
        # Speckles must stay apart so no merged blob survives mask cleaning.
        if any(math.hypot(cx - px, cy - py) < r + pr + 2.0 for px, py, pr in placed):
            continue
        y0, y1 = max(0, int(cy) - r - 1), min(h, int(cy) + r + 2)
        x0, x1 = max(0, int(cx) - r - 1), min(w, int(cx) + r + 2)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        inside = np.hypot(xx - cx, yy - cy) <= r
        out[yy[inside], xx[inside]] = True
        placed.append((cx, cy, r))
    if len(placed) < count:
        raise PhantomSpecError("no room to place speckles")
    return out, _changed_meta("speckle", cells, out, {"count": count, "centers": [[p[0], p[1]] for p in placed]})


def inject_defects(mask: PixelGrid, defects, seed: int, protect=()) -> tuple[PixelGrid, list[dict]]:
    """Apply defects in order, deterministically under the seed.

    protect lists (x, y, radius) zones that gap and branch placement must
    avoid, e.g. around the true head. Returns the defective mask and one
    metadata record per defect with the changed extent.
    """
    rng = np.random.default_rng(seed)
    cells = mask.cells.copy()
    metadata = []
    for defect in defects:
        _validate_defect(defect)
        kind = defect["kind"]
        if kind == "gap":
            cells, meta = _apply_gap(cells, rng, float(defect["length"]), protect)
        elif kind == "branch":
            cells, meta = _apply_branch(cells, rng, float(defect["length"]), protect)
        elif kind == "outlier":
            cells, meta = _apply_outlier(cells, rng, float(defect["area"]), protect)
        else:
            cells, meta = _apply_speckle(cells, rng, int(defect["count"]), protect)
        metadata.append(meta)
    return PixelGrid(cells), metadata


# --- corpus sampling ----------------------------------------------------


@dataclass(frozen=True)
class CorpusProfile:
    """Scale-dependent sampling envelope for corpus generation."""

    image_size: tuple[int, int] = (320, 320)
    radius_range: tuple[float, float] = (26.0, 30.0)
    robot_radius: float = 1.8
    head_length: float = 60.0
    window: int = 40
    half_window: int = 20
    thresholds: PoseThresholds = field(default_factory=PoseThresholds)
    border_clear: float = 42.0
    min_curve_radius: float = 250.0
    d_margin: float = 1.5
    theta_margin: float = 1.5

    @property
    def tail_min(self) -> float:
        return float(self.window - 2)

    @property
    def tail_max(self) -> float:
        return math.sqrt(2.0) * (self.window - 1) + 2.0

    @property
    def tail_ref(self) -> float:
        return (self.tail_min + self.tail_max) / 2.0


DEFAULT_PROFILE = CorpusProfile()
SMALL_PROFILE = CorpusProfile(
    image_size=(128, 128),
    radius_range=(17.0, 19.0),
    robot_radius=1.5,
    head_length=42.0,
    window=24,
    half_window=12,
    thresholds=PoseThresholds(d_allow=6.0, theta_allow=15.0),
    border_clear=24.0,
    min_curve_radius=150.0,
    theta_margin=2.5,
)
PROFILES = {"default": DEFAULT_PROFILE, "small": SMALL_PROFILE}


def stable_state(angle_deg: float, offset: float, profile: CorpusProfile) -> str | None:
    """State label if it is invariant over the tail-arc range and metric
    perturbations (d_margin pixels, theta_margin degrees), else None."""
    thr = profile.thresholds
    a = math.radians(angle_deg)
    dd, dt = profile.d_margin, profile.theta_margin
    labels = set()
    for tau in (profile.tail_min, profile.tail_ref, profile.tail_max):
        c_tail = offset - tau * math.sin(a)
        head_signs = (True, False) if abs(offset) <= dd else ((offset >= 0),)
        tail_signs = (True, False) if abs(c_tail) <= dd else ((c_tail >= 0),)
        for hs in head_signs:
            for ts in tail_signs:
                for d_head in (max(0.0, abs(offset) - dd), abs(offset) + dd):
                    for d_tail in (max(0.0, abs(c_tail) - dd), abs(c_tail) + dd):
                        for theta in (max(0.0, abs(angle_deg) - dt), abs(angle_deg) + dt):
                            p = PoseParameters(
                                c_head=offset, c_tail=c_tail,
                                d_head=d_head, d_tail=d_tail,
                                s=hs != ts, theta=theta,
                            )
                            labels.add(classify_state(p, thr).label)
                            if len(labels) > 1:
                                return None
    return labels.pop()


def _sample_pose_params(rng, target: str, profile: CorpusProfile):
    """Heuristic (angle, offset) draw inside the target state's envelope."""
    thr = profile.thresholds
    sign = 1.0 if rng.random() < 0.5 else -1.0
    if target == "A":
        angle = sign * rng.uniform(1.0, min(8.0, 0.55 * thr.theta_allow))
        offset = sign * rng.uniform(0.5, 0.5 * thr.d_allow)
        return angle, offset
    if target == "B":
        angle = sign * rng.uniform(thr.theta_allow + 3.0, thr.theta_allow + 5.0)
        sin_min = math.sin(math.radians(thr.theta_allow + 3.0))
        hi = min(thr.d_allow - 1.5, profile.tail_min * sin_min / 2.0 - 1.5)
        if hi <= 1.0:
            return None
        return angle, sign * rng.uniform(1.0, hi)
    if target == "C":
        denom = profile.tail_min - profile.tail_max / 2.0
        if denom <= 0 or 3.5 / denom >= 0.9:
            return None
        a_min = math.degrees(math.asin(3.5 / denom)) + 0.5
        angle = sign * rng.uniform(a_min, a_min + 5.0)
        sin_a = math.sin(math.radians(abs(angle)))
        lo = profile.tail_max * sin_a / 2.0 + 1.75
        hi = profile.tail_min * sin_a - 1.75
        if lo >= hi:
            return None
        return angle, sign * rng.uniform(lo, hi)
    if target == "D":
        angle = sign * rng.uniform(4.0, 10.0)
        sin_a = math.sin(math.radians(abs(angle)))
        lo = max(thr.d_allow + 2.5, profile.tail_max * sin_a + 2.0)
        hi = profile.radius_range[0] - profile.robot_radius - 3.5
        if lo >= hi:
            return None
        return angle, sign * rng.uniform(lo, hi)
    raise ValueError(f"unknown state {target!r}")


def sample_phantom(rng, target_state: str, profile: CorpusProfile = DEFAULT_PROFILE, defects=(), seed: int = 0):
    """Rejection-sample a spec whose analytic state is robustly target_state.

    Returns (spec, vessel_mask, robot_mask, truth). Raises a spec error when
    the target state is infeasible under the profile.
    """
    w, h = profile.image_size
    for _ in range(300):
        pose = _sample_pose_params(rng, target_state, profile)
        if pose is None:
            continue
        angle, offset = pose
        if stable_state(angle, offset, profile) != target_state:
            continue

        radius = rng.uniform(*profile.radius_range)
        budget = radius - profile.robot_radius - 3.0
        tip_offset = offset - profile.head_length * math.sin(math.radians(angle))
        if abs(offset) > budget or abs(tip_offset) > budget:
            continue

        horizontal = rng.random() < 0.5
        span = w if horizontal else h
        across = h if horizontal else w
        lo_y = profile.border_clear + 16.0
        hi_y = across - 1 - lo_y
        if lo_y >= hi_y:
            continue
        y0 = rng.uniform(lo_y, hi_y)
        y3 = min(hi_y, max(lo_y, y0 + rng.uniform(-50.0, 50.0)))
        y1 = y0 + (y3 - y0) / 3.0 + rng.uniform(-12.0, 12.0)
        y2 = y0 + 2.0 * (y3 - y0) / 3.0 + rng.uniform(-12.0, 12.0)
        xs = (-10.0, span / 3.0, 2.0 * span / 3.0, span + 10.0)
        ys = (y0, y1, y2, y3)
        control = tuple(zip(xs, ys)) if horizontal else tuple(zip(ys, xs))
        if rng.random() < 0.5:
            control = control[::-1]

        cl = _Centerline(control)
        if cl.min_curve_radius() < profile.min_curve_radius:
            continue
        border_dist = np.minimum(
            np.minimum(cl.points[:, 0], w - 1 - cl.points[:, 0]),
            np.minimum(cl.points[:, 1], h - 1 - cl.points[:, 1]),
        )
        clear = border_dist >= profile.border_clear
        inside = (
            (cl.points[:, 0] >= 1.0)
            & (cl.points[:, 0] <= w - 2.0)
            & (cl.points[:, 1] >= 1.0)
            & (cl.points[:, 1] <= h - 2.0)
        )
        if not clear.any() or not inside.any():
            continue
        s_entry = float(cl.s[int(np.argmax(inside))])
        pad = profile.half_window + 15.0
        s_lo = float(cl.s[int(np.argmax(clear))]) + pad
        s_hi = float(cl.s[len(clear) - 1 - int(np.argmax(clear[::-1]))]) - pad
        a_rad = math.radians(angle)
        lo = max(s_lo, s_entry + 25.0 + profile.head_length * math.cos(a_rad))
        hi = min(s_hi, cl.length - 30.0)
        if lo + 5.0 > hi:
            continue
        s0 = rng.uniform(lo, hi)
        robot_length = s0 - profile.head_length * math.cos(a_rad) - s_entry + profile.head_length

        spec = PhantomSpec(
            image_size=(w, h),
            vessel_control_points=control,
            vessel_radius=radius,
            robot_offset=offset,
            robot_angle=angle,
            robot_length=robot_length,
            head_length=profile.head_length,
            robot_radius=profile.robot_radius,
            defects=defects,
            seed=seed,
        )
        try:
            vessel, robot, truth = generate(spec, thresholds=profile.thresholds, tail_arc=profile.tail_ref)
        except PhantomSpecError:
            continue
        if truth.state_true != target_state:
            continue
        return spec, vessel, robot, truth
    raise PhantomSpecError(f"could not sample a stable state-{target_state} phantom under this profile")


def _plan_defect(kind: str, rng) -> dict:
    if kind == "gap":
        return {"kind": "gap", "length": int(rng.integers(3, 6))}
    if kind == "branch":
        return {"kind": "branch", "length": int(rng.integers(10, 16))}
    if kind == "outlier":
        return {"kind": "outlier", "area": int(rng.integers(70, 111))}
    if kind == "speckle":
        return {"kind": "speckle", "count": int(rng.integers(5, 11))}
    raise PhantomSpecError(f"unknown defect kind {kind!r}")


def record_seed(corpus_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=[int(corpus_seed), int(index)]).generate_state(1, np.uint64)[0])


def build_corpus(
    count: int,
    seed: int,
    profile: CorpusProfile = DEFAULT_PROFILE,
    states: str = "ABCD",
    defect_kinds=(),
    frames: bool = False,
):
    """Yield corpus records as in-memory data.

    Records cycle through the requested states (and defect kinds, when
    given). Each yield is (meta, vessel_mask, robot_mask, frame) where the
    robot mask carries the defects and frames render the defect-free robot.
    Defect placement uses the sub-seed (record seed, 1) and frame noise
    (record seed, 2), so a record is reproducible from its spec alone.
    """
    if not states or any(s not in "ABCD" for s in states):
        raise ValueError("states must be a non-empty subset of ABCD")
    for kind in defect_kinds:
        if kind not in DEFECT_KINDS:
            raise ValueError(f"unknown defect kind {kind!r}")
    for i in range(count):
        rseed = record_seed(seed, i)
        rng = np.random.default_rng(rseed)
        defects = (_plan_defect(defect_kinds[i % len(defect_kinds)], rng),) if defect_kinds else ()
        spec, vessel, robot, truth = sample_phantom(
            rng, states[i % len(states)], profile, defects=defects, seed=rseed
        )
        robot_out, applied = robot, []
        if spec.defects:
            protect = [(truth.head[0], truth.head[1], 50.0)]
            robot_out, applied = inject_defects(robot, spec.defects, record_seed(rseed, 1), protect=protect)
        frame = render_frame(vessel, robot, seed=record_seed(rseed, 2)) if frames else None
        meta = {
            "id": i,
            "spec": to_jsonable(spec),
            "truth": to_jsonable(truth),
            "defects_applied": applied,
        }
        yield meta, vessel, robot_out, frame


def write_corpus(
    out_dir,
    count: int,
    seed: int,
    profile: CorpusProfile = DEFAULT_PROFILE,
    states: str = "ABCD",
    defect_kinds=(),
    frames: bool = False,
) -> list[dict]:
    """Generate a corpus and write masks, optional frames and the manifest.

    Returns the manifest records (one JSON-lines record per phantom with
    file paths relative to out_dir).
    """
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    if frames:
        (out / "frames").mkdir(parents=True, exist_ok=True)
    records = []
    for meta, vessel, robot, frame in build_corpus(count, seed, profile, states, defect_kinds, frames):
        i = meta["id"]
        vessel_path = f"masks/{i:04d}_vessel.pgm"
        robot_path = f"masks/{i:04d}_robot.pgm"
        save_mask(vessel, out / vessel_path)
        save_mask(robot, out / robot_path)
        frame_path = None
        if frame is not None:
            frame_path = f"frames/{i:04d}.pgm"
            save_gray(frame, out / frame_path)
        records.append(
            {
                **meta,
                "vessel_mask_path": vessel_path,
                "robot_mask_path": robot_path,
                "frame_path": frame_path,
            }
        )
    write_jsonl(out / "manifest.jsonl", records)
    return records


def spec_from_dict(data: dict) -> PhantomSpec:
    """Rebuild a spec from its manifest JSON form."""
    return PhantomSpec(
        image_size=tuple(data["image_size"]),
        vessel_control_points=tuple(tuple(p) for p in data["vessel_control_points"]),
        vessel_radius=data["vessel_radius"],
        robot_offset=data["robot_offset"],
        robot_angle=data["robot_angle"],
        robot_length=data["robot_length"],
        head_length=data.get("head_length", 60.0),
        robot_radius=data.get("robot_radius", 1.8),
        defects=tuple(data.get("defects", ())),
        seed=data.get("seed", 0),
    )
