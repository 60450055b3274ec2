"""HTTP surface over the perception library.

The service is stateless and purely data-in/data-out: masks arrive and
leave as base64 PGM bytes, corpus generation returns records inline, and
evaluation aggregates value pairs. File handling belongs to the clients.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import PhantomSpecError, RasterFormatError, TrajectoryNotFoundError
from ..grid import gray_to_bytes, mask_from_bytes, mask_to_bytes
from ..phantom import PROFILES, build_corpus
from ..pipeline import aggregate_corpus_stats, overlay_png_bytes, perceive_frame, render_debug_overlay
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    GeneratedRecord,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    PerceiveRequest,
    PerceiveResponse,
)


def _decode_mask(b64: str, threshold: int, name: str):
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"{name}: invalid base64") from exc
    try:
        return mask_from_bytes(raw, threshold)
    except RasterFormatError as exc:
        raise HTTPException(status_code=400, detail=f"{name}: {exc}") from exc


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app() -> FastAPI:
    app = FastAPI(title="vesselpose", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config/default")
    def default_config() -> dict:
        from ..config import PipelineConfig

        return PipelineConfig().to_dict()

    @app.post("/perceive", response_model=PerceiveResponse)
    def perceive(req: PerceiveRequest) -> PerceiveResponse:
        from ..config import PipelineConfig

        cfg = req.config or PipelineConfig()
        vessel = _decode_mask(req.vessel_mask, cfg.grid.threshold, "vessel_mask")
        robot = _decode_mask(req.robot_mask, cfg.grid.threshold, "robot_mask")
        try:
            result = perceive_frame(vessel, robot, cfg)
        except TrajectoryNotFoundError as exc:
            return PerceiveResponse(found=False, reason=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        overlay = None
        if req.debug:
            overlay = _b64(overlay_png_bytes(render_debug_overlay(vessel, robot, result)))
        return PerceiveResponse(found=True, report=result.report, overlay=overlay)

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        try:
            records = [
                GeneratedRecord(
                    **meta,
                    vessel_mask=_b64(mask_to_bytes(vessel)),
                    robot_mask=_b64(mask_to_bytes(robot)),
                    frame=None if frame is None else _b64(gray_to_bytes(frame)),
                )
                for meta, vessel, robot, frame in build_corpus(
                    req.count,
                    req.seed,
                    profile=PROFILES[req.profile],
                    states=req.states,
                    defect_kinds=tuple(req.defects),
                    frames=req.frames,
                )
            ]
        except (PhantomSpecError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return GenerateResponse(records=records)

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        if len(req.theta_pairs) != len(req.state_pairs) and req.state_pairs:
            raise HTTPException(status_code=400, detail="theta_pairs and state_pairs lengths differ")
        aggregate = aggregate_corpus_stats(
            req.theta_pairs, req.state_pairs, req.full_range, req.bin_width_pct
        )
        return EvaluateResponse(aggregate=aggregate)

    return app
