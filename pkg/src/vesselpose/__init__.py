"""Vessel/robot mask perception: skeleton-based trajectory extraction, pose
state classification, synthetic phantom generation, and agreement statistics.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, profile_config
from .errors import (
    ConfigError,
    DegenerateInputError,
    InsufficientDataError,
    PhantomSpecError,
    RasterFormatError,
    TrajectoryNotFoundError,
    UndefinedCorrelationError,
    VesselPoseError,
)
from .grid import PixelGrid, clean_mask, label_components, load_mask, save_mask
from .phantom import PhantomSpec, PhantomTruth, generate, inject_defects, render_frame, write_corpus
from .pipeline import PerceptionResult, aggregate_corpus_stats, perceive_frame
from .pose import (
    FittedSegment,
    PoseParameters,
    PoseState,
    PoseThresholds,
    classify_state,
    compute_pose,
    extract_head_segment,
    extract_vessel_segment,
    fit_segment,
)
from .skeleton import Skeleton, connect_gaps, detect_endpoints, skeletonize
from .trajectory import PixelPath, TraceConfig, find_start_points, select_optimal_path, trace_paths

__all__ = [
    "__version__",
    "ConfigError",
    "DegenerateInputError",
    "FittedSegment",
    "InsufficientDataError",
    "PerceptionResult",
    "PhantomSpec",
    "PhantomSpecError",
    "PhantomTruth",
    "PipelineConfig",
    "PixelGrid",
    "PixelPath",
    "PoseParameters",
    "PoseState",
    "PoseThresholds",
    "RasterFormatError",
    "Skeleton",
    "TraceConfig",
    "TrajectoryNotFoundError",
    "UndefinedCorrelationError",
    "VesselPoseError",
    "aggregate_corpus_stats",
    "classify_state",
    "clean_mask",
    "compute_pose",
    "connect_gaps",
    "detect_endpoints",
    "extract_head_segment",
    "extract_vessel_segment",
    "fit_segment",
    "find_start_points",
    "generate",
    "inject_defects",
    "label_components",
    "load_mask",
    "perceive_frame",
    "profile_config",
    "render_frame",
    "save_mask",
    "select_optimal_path",
    "skeletonize",
    "trace_paths",
    "write_corpus",
]
