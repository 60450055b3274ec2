"""Pipeline configuration as one structured JSON document.

Each pipeline stage gets its own section with the module defaults; unknown
keys are rejected everywhere so typos fail loudly instead of silently
falling back to defaults.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError


class GridSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threshold: int = Field(default=128, ge=0, le=255)
    min_area: int = Field(default=64, ge=0)
    max_hole_area: int = Field(default=64, ge=0)


class SkeletonSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gap_threshold: float = Field(default=10.0, ge=0.0)


class TrajectorySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    boundary_margin: int = Field(default=5, ge=0)
    max_depth: int = Field(default=4096, ge=1)
    weights: tuple[float, float, float] = (0.2, 0.4, 0.4)

    @field_validator("weights")
    @classmethod
    def _finite(cls, v):
        if not all(math.isfinite(w) for w in v):
            raise ValueError("weights must be finite")
        return v


class PoseSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window: int = Field(default=40, ge=2)
    half_window: int = Field(default=20, ge=1)
    d_allow: float = Field(default=10.0, gt=0.0)
    theta_allow: float = Field(default=15.0, gt=0.0)
    theta_max: float = Field(default=90.0, gt=0.0)
    steering_scale: float = Field(default=1.0, ge=0.0)


class GeneratorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # The generator algorithm is pinned by name so corpora stay reproducible.
    rng: Literal["pcg64"] = "pcg64"
    noise_sigma: float = Field(default=6.0, ge=0.0)


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: GridSection = Field(default_factory=GridSection)
    skeleton: SkeletonSection = Field(default_factory=SkeletonSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    pose: PoseSection = Field(default_factory=PoseSection)
    generator: GeneratorSection = Field(default_factory=GeneratorSection)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


def profile_config(profile: str = "default") -> PipelineConfig:
    """Config matched to a corpus scale profile ("default" or "small")."""
    if profile == "default":
        return PipelineConfig()
    if profile == "small":
        return PipelineConfig(pose=PoseSection(window=24, half_window=12, d_allow=6.0))
    raise ConfigError(f"unknown profile {profile!r}")
