"""Request and response models for the perception service.

All binary rasters travel as base64-encoded PGM bytes; the service never
touches the filesystem. Unknown keys are rejected on every model.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..config import PipelineConfig

StateLabel = Literal["A", "B", "C", "D"]


class HealthResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    status: Literal["ok"]
    version: str


class PoseReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    head: tuple[int, int]
    c_head: float
    c_tail: float
    d_head: float
    d_tail: float
    s: bool
    theta_deg: float
    state: StateLabel
    speed_hint: Literal["high", "reduced", "minimum", "moderate"]
    steering_deg: float


class PerceiveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vessel_mask: str = Field(description="base64-encoded PGM bytes")
    robot_mask: str = Field(description="base64-encoded PGM bytes")
    config: PipelineConfig | None = None
    debug: bool = Field(default=False, description="include a rendered overlay in the response")


class PerceiveResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    found: bool
    report: PoseReport | None = None
    reason: str | None = None
    overlay: str | None = Field(default=None, description="base64-encoded PNG, debug requests only")


class GenerateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(ge=0)
    seed: int = Field(default=0, ge=0)
    states: str = "ABCD"
    profile: Literal["default", "small"] = "default"
    defects: list[Literal["gap", "branch", "outlier", "speckle"]] = Field(default_factory=list)
    frames: bool = False


class GeneratedRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    spec: dict
    truth: dict
    defects_applied: list[dict]
    vessel_mask: str
    robot_mask: str
    frame: str | None = None


class GenerateResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    records: list[GeneratedRecord]


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta_pairs: list[tuple[float, float]] = Field(description="(measured, reference) degrees")
    state_pairs: list[tuple[StateLabel, StateLabel]] = Field(
        default_factory=list, description="(reference, predicted) labels"
    )
    full_range: float = Field(default=180.0, gt=0.0)
    bin_width_pct: float = Field(default=4.0, gt=0.0)


class EvaluateResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")

    aggregate: dict
