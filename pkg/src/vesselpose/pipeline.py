"""End-to-end per-frame perception and corpus aggregation.

perceive_frame composes the full chain: mask cleanup, thinning, gap repair,
start-point detection, branch-aware tracing, path scoring, head detection,
segment fitting, pose parameters and state classification. The corpus
aggregator turns collected (measured, truth) pairs into the evaluation
report.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import InsufficientDataError, TrajectoryNotFoundError, UndefinedCorrelationError
from .evalstats import (
    ConfusionMatrix,
    PairedMeasurements,
    bland_altman,
    classification_report,
    error_range_distribution,
    error_stats,
    pearson,
    spearman,
)
from .grid import PixelGrid, clean_mask
from .pose import (
    PoseThresholds,
    classify_state,
    compute_pose,
    extract_head_segment,
    extract_vessel_segment,
    head_window_start,
    pose_report,
)
from .skeleton import GapRepairConfig, Skeleton, connect_gaps, detect_endpoints, skeletonize
from .trajectory import PixelPath, TraceConfig, find_start_points, select_optimal_path, trace_paths


@dataclass(frozen=True)
class PerceptionResult:
    """Pose report plus the intermediates useful for debugging overlays."""

    report: dict
    path: PixelPath
    robot_skeleton: PixelGrid
    vessel_skeleton: PixelGrid


def perceive_frame(
    vessel_mask: PixelGrid, robot_mask: PixelGrid, config: PipelineConfig | None = None
) -> PerceptionResult:
    """Run the perception chain on one vessel/robot mask pair.

    Raises TrajectoryNotFoundError when no robot trajectory can be
    established (empty mask, one-pixel skeleton, or empty vessel skeleton)
    and ValueError when the masks disagree in size.
    """
    cfg = config or PipelineConfig()
    if vessel_mask.cells.shape != robot_mask.cells.shape:
        raise ValueError(
            f"mask dimensions differ: vessel {vessel_mask.width}x{vessel_mask.height}, "
            f"robot {robot_mask.width}x{robot_mask.height}"
        )
    robot_clean = clean_mask(robot_mask, cfg.grid.min_area, cfg.grid.max_hole_area)
    vessel_clean = clean_mask(vessel_mask, cfg.grid.min_area, cfg.grid.max_hole_area)

    repaired = connect_gaps(skeletonize(robot_clean).grid, GapRepairConfig(cfg.skeleton.gap_threshold))
    robot_skel = Skeleton(grid=repaired, endpoints=tuple(detect_endpoints(repaired)))

    tcfg = TraceConfig(
        boundary_margin=cfg.trajectory.boundary_margin,
        max_depth=cfg.trajectory.max_depth,
        weights=tuple(cfg.trajectory.weights),
    )
    candidates = [trace_paths(robot_skel, s, tcfg) for s in find_start_points(robot_skel, tcfg)]
    path, head = select_optimal_path(candidates, tcfg.weights)
    if len(path) < 2:
        raise TrajectoryNotFoundError("robot trajectory collapsed to a single pixel")

    head_seg = extract_head_segment(path, cfg.pose.window)
    tail_point = head_window_start(path, cfg.pose.window)
    vessel_skel = skeletonize(vessel_clean)
    travel = (float(head[0] - path.start[0]), float(head[1] - path.start[1]))
    vessel_seg = extract_vessel_segment(
        vessel_skel.grid, (float(head[0]), float(head[1])), cfg.pose.half_window, travel=travel
    )
    params = compute_pose(head_seg, tail_point, vessel_seg)
    state = classify_state(
        params,
        PoseThresholds(d_allow=cfg.pose.d_allow, theta_allow=cfg.pose.theta_allow),
        theta_max=cfg.pose.theta_max,
        steering_scale=cfg.pose.steering_scale,
    )
    return PerceptionResult(
        report=pose_report(head, params, state),
        path=path,
        robot_skeleton=repaired,
        vessel_skeleton=vessel_skel.grid,
    )


def aggregate_corpus_stats(
    theta_pairs, state_pairs, full_range: float = 180.0, bin_width_pct: float = 4.0
) -> dict:
    """Evaluation aggregate over (measured, reference) angle and state pairs.

    Statistics whose preconditions fail (fewer than two pairs, constant
    series) are reported as null rather than failing the whole aggregate.
    """
    alg = [float(a) for a, _ in theta_pairs]
    ref = [float(r) for _, r in theta_pairs]
    angle = {
        "error_stats": None,
        "pearson": None,
        "spearman": None,
        "bland_altman": None,
        "error_range": None,
    }
    if alg:
        m = PairedMeasurements(alg, ref)
        angle["error_range"] = error_range_distribution(m, full_range, bin_width_pct)
        for key, fn in (
            ("error_stats", error_stats),
            ("pearson", pearson),
            ("spearman", spearman),
            ("bland_altman", bland_altman),
        ):
            try:
                angle[key] = fn(m)
            except (InsufficientDataError, UndefinedCorrelationError):
                pass
    classification = None
    if state_pairs:
        cm = ConfusionMatrix.from_pairs(
            [a for a, _ in state_pairs], [p for _, p in state_pairs]
        )
        classification = classification_report(cm)
        classification["confusion"] = {"classes": list(cm.classes), "counts": [list(r) for r in cm.counts]}
    return {"count": len(alg), "angle": angle, "classification": classification}


_OVERLAY_COLORS = {
    "background": (20, 20, 20),
    "vessel": (70, 70, 70),
    "vessel_skeleton": (120, 120, 200),
    "robot": (120, 80, 40),
    "path": (60, 200, 60),
    "head": (255, 255, 255),
}


def render_debug_overlay(vessel_mask: PixelGrid, robot_mask: PixelGrid, result: PerceptionResult) -> np.ndarray:
    """RGB visualization of the masks, skeletons, selected path and head."""
    h, w = vessel_mask.cells.shape
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = _OVERLAY_COLORS["background"]
    img[vessel_mask.cells] = _OVERLAY_COLORS["vessel"]
    img[result.vessel_skeleton.cells] = _OVERLAY_COLORS["vessel_skeleton"]
    img[robot_mask.cells] = _OVERLAY_COLORS["robot"]
    for x, y in result.path.points:
        img[y, x] = _OVERLAY_COLORS["path"]
    hx, hy = result.report["head"]
    for dx in range(-3, 4):
        for dy in (0, dx, -dx):
            x, y = hx + dx, hy + dy
            if 0 <= x < w and 0 <= y < h:
                img[y, x] = _OVERLAY_COLORS["head"]
    return img


def overlay_png_bytes(overlay: np.ndarray) -> bytes:
    """Encode an RGB overlay as PNG."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(overlay, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
