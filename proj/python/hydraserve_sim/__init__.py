"""Serverless LLM cold-start simulator: predictors, allocator and runner."""

from ._core import (
    ModelProfile,
    NoCapacity,
    PlacementImpossible,
    PlanError,
    ServerSpec,
    StageTimings,
    ValidationError,
    allocate,
    derive_slos,
    predict_ttft_basic,
    predict_ttft_overlapped,
    predict_tpot,
    run_config,
    run_scenario,
    sample_arrivals,
    sample_gaps,
    slo_attainment,
)

__all__ = [
    "ModelProfile",
    "NoCapacity",
    "PlacementImpossible",
    "PlanError",
    "ServerSpec",
    "StageTimings",
    "ValidationError",
    "allocate",
    "derive_slos",
    "predict_ttft_basic",
    "predict_ttft_overlapped",
    "predict_tpot",
    "run_config",
    "run_scenario",
    "sample_arrivals",
    "sample_gaps",
    "slo_attainment",
]
