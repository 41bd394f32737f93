"""Pydantic request/response models for the service API."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfiguredRequest(BaseModel):
    """Base for requests that carry a run configuration.

    ``config`` is the same JSON object the CLI reads from --config; the
    optional fields override it, mirroring the CLI flags.
    """

    config: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    preset: Optional[Literal["desk", "paper"]] = None
    threshold: Optional[float] = None
    rule: Optional[Literal["preponderance", "favored"]] = None


class GenerateRequest(ConfiguredRequest):
    output_dir: str


class GenerateResponse(BaseModel):
    signal_paths: list[str]
    manifest_path: str


class BuildDatasetRequest(ConfiguredRequest):
    output_dir: str


class BuildDatasetResponse(BaseModel):
    dataset_dir: str
    counts: dict[str, int]
    manifest: str


class TrainRequest(ConfiguredRequest):
    dataset_dir: str
    output_dir: str


class TrainResponse(BaseModel):
    model_path: str
    validation_accuracy: float
    per_class_accuracy: list[float]
    epochs_accepted: int
    final_loss: float


class IdentifyRequest(ConfiguredRequest):
    model_path: str
    signal_path: str
    output_dir: Optional[str] = None


class DecisionResponse(BaseModel):
    winner: int
    votes_used: int
    achieved_certainty: float
    rule: str
    conclusive: bool
    exhausted: bool
    acceptable_error: float
    true_emitter_id: Optional[int] = None
    decision_path: Optional[str] = None


class SweepRequest(ConfiguredRequest):
    output_dir: str
    voter: Literal["confusion", "model"] = "confusion"
    model_path: Optional[str] = None
    dataset_dir: Optional[str] = None


class SweepRowModel(BaseModel):
    threshold: float
    trials: int
    wrong: int
    inconclusive: int
    max_votes_used: int
    mean_votes_used: float


class SweepResponse(BaseModel):
    csv_path: str
    rows: list[SweepRowModel]


class ReportRequest(BaseModel):
    results_dir: str
    output_dir: Optional[str] = None


class FitModel(BaseModel):
    slope: float
    intercept: float
    r_squared: float


class ReportResponse(BaseModel):
    lines: list[str]
    fit: Optional[FitModel] = None
    votes_per_decade: Optional[float] = None
    fit_csv_path: Optional[str] = None


class ErrorDetail(BaseModel):
    category: Literal["config", "io", "numeric", "inconclusive"]
    message: str
