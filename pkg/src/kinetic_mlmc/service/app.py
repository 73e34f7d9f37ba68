"""HTTP front end exposing the experiment drivers.

Domain failures map onto structured errors: invalid parameters or
configuration give 422 with kind "config", exceeded budgets give 400 with
kind "budget".  The CLI translates these back into its exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import BudgetError, ConfigError, ParameterError, StabilityError
from . import runner, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="kinetic-mlmc", version="0.1.0")

    @app.exception_handler(ConfigError)
    @app.exception_handler(ParameterError)
    @app.exception_handler(StabilityError)
    async def _config_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc), "kind": "config"})

    @app.exception_handler(BudgetError)
    async def _budget_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "budget"})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/level-study", response_model=schemas.LevelStudyResponse)
    def level_study(req: schemas.LevelStudyRequest) -> schemas.LevelStudyResponse:
        return runner.run_level_study(req)

    @app.post("/mlmc-run", response_model=schemas.MlmcRunResponse)
    def mlmc_run(req: schemas.MlmcRunRequest) -> schemas.MlmcRunResponse:
        return runner.run_mlmc(req)

    @app.post("/compare-classical", response_model=schemas.CompareClassicalResponse)
    def compare_classical(req: schemas.CompareClassicalRequest) -> schemas.CompareClassicalResponse:
        return runner.run_compare_classical(req)

    @app.post("/trajectory", response_model=schemas.TrajectoryResponse)
    def trajectory(req: schemas.TrajectoryRequest) -> schemas.TrajectoryResponse:
        return runner.run_trajectory(req)

    return app


app = create_app()
