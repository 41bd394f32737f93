"""FastAPI application wrapping the core package."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, workflows
from ..config import ConfigError, apply_overrides, settings_from_mapping
from . import schemas


def _settings(req: schemas.ConfiguredRequest):
    mapping = apply_overrides(
        req.config,
        seed=req.seed,
        preset=req.preset,
        acceptable_error=req.threshold,
        rule=req.rule,
    )
    return settings_from_mapping(mapping)


def create_app() -> FastAPI:
    app = FastAPI(title="seivote", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError):
        return JSONResponse(
            status_code=400, content={"detail": {"category": "config", "message": str(exc)}}
        )

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=404, content={"detail": {"category": "io", "message": str(exc)}}
        )

    @app.exception_handler(OSError)
    async def io_error(request: Request, exc: OSError):
        return JSONResponse(
            status_code=400, content={"detail": {"category": "io", "message": str(exc)}}
        )

    @app.exception_handler(ValueError)
    async def numeric_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400, content={"detail": {"category": "numeric", "message": str(exc)}}
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/signals/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        return workflows.generate_signals(_settings(req), req.output_dir)

    @app.post("/dataset/build", response_model=schemas.BuildDatasetResponse)
    def build_dataset(req: schemas.BuildDatasetRequest):
        return workflows.run_build_dataset(_settings(req), req.output_dir)

    @app.post("/model/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        return workflows.run_train(_settings(req), req.dataset_dir, req.output_dir)

    @app.post("/identify", response_model=schemas.DecisionResponse)
    def identify(req: schemas.IdentifyRequest):
        settings = _settings(req)
        return workflows.run_identify(
            model_path=req.model_path,
            signal_path=req.signal_path,
            acceptable_error=settings.acceptable_error,
            rule=settings.rule,
            max_votes=settings.max_votes,
            seed=settings.seed,
            block=settings.downsample_block,
            log_power=settings.log_power,
            out_dir=req.output_dir,
        )

    @app.post("/sweep/accuracy", response_model=schemas.SweepResponse)
    def sweep_accuracy(req: schemas.SweepRequest):
        return workflows.run_accuracy_sweep(
            _settings(req),
            req.output_dir,
            voter_kind=req.voter,
            model_path=req.model_path,
            dataset_dir=req.dataset_dir,
        )

    @app.post("/sweep/certainty", response_model=schemas.SweepResponse)
    def sweep_certainty(req: schemas.SweepRequest):
        return workflows.run_certainty_sweep(
            _settings(req),
            req.output_dir,
            voter_kind=req.voter,
            model_path=req.model_path,
            dataset_dir=req.dataset_dir,
        )

    @app.post("/report", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest):
        return workflows.run_report(req.results_dir, req.output_dir)

    return app


app = create_app()
