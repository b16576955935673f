"""FastAPI application exposing the design machinery over HTTP.

Error mapping: configuration problems return 400, numerical failures
422, nonconvergence 409; all carry a machine-readable body with an
``error`` slug (the exception class name) and a human-readable
``detail``.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    ConfigError,
    ConvergenceError,
    CrossoverDesignError,
    DimensionMismatch,
    NumericalError,
    RankDeficientDesign,
)
from . import handlers
from . import schemas as sc

app = FastAPI(
    title="crossover-design",
    version=__version__,
    description=(
        "Locally D-optimal crossover designs for correlated GLM responses: "
        "optimization, misspecification metrics, two-stage simulation, and "
        "matrix dumps."
    ),
)


def _status_for(exc: CrossoverDesignError) -> int:
    if isinstance(exc, ConfigError):
        return 400
    if isinstance(exc, ConvergenceError):
        return 409
    if isinstance(exc, (NumericalError, DimensionMismatch, RankDeficientDesign)):
        return 422
    return 500


@app.exception_handler(CrossoverDesignError)
async def _domain_error_handler(request: Request, exc: CrossoverDesignError):
    body = sc.ErrorBody(error=type(exc).__name__, detail=str(exc))
    return JSONResponse(status_code=_status_for(exc), content=body.model_dump())


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/fixtures", response_model=list[sc.FixtureInfo])
def fixtures() -> list[sc.FixtureInfo]:
    return handlers.list_fixtures()


@app.post("/optimize", response_model=sc.OptimizeResponse)
def optimize_endpoint(req: sc.OptimizeRequest) -> sc.OptimizeResponse:
    return handlers.handle_optimize(req)


@app.post("/efficiency", response_model=sc.EfficiencyResponse)
def efficiency_endpoint(req: sc.EfficiencyRequest) -> sc.EfficiencyResponse:
    return handlers.handle_efficiency(req)


@app.post("/misspec-table", response_model=sc.MisspecTableResponse)
def misspec_table_endpoint(req: sc.MisspecTableRequest) -> sc.MisspecTableResponse:
    return handlers.handle_misspec_table(req)


@app.post("/simulate", response_model=sc.SimulateResponse)
def simulate_endpoint(req: sc.SimulateRequest) -> sc.SimulateResponse:
    return handlers.handle_simulate(req)


@app.post("/dump-matrices", response_model=sc.DumpMatricesResponse)
def dump_matrices_endpoint(req: sc.DumpMatricesRequest) -> sc.DumpMatricesResponse:
    return handlers.handle_dump_matrices(req)
