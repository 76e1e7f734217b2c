"""FastAPI application exposing the toolchain over HTTP."""

from __future__ import annotations

from fastapi import FastAPI

from .. import __version__
from . import handlers, models


def create_app() -> FastAPI:
    app = FastAPI(
        title="fuel",
        description="Capability checking, execution, and fuzzing for Fuel modules.",
        version=__version__,
    )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/check", response_model=models.CheckResponse)
    def check(req: models.CheckRequest) -> models.CheckResponse:
        return handlers.check_source(req)

    @app.post("/run", response_model=models.RunResponse)
    def run(req: models.RunRequest) -> models.RunResponse:
        return handlers.run_source(req)

    @app.post("/fuzz", response_model=models.FuzzResponse)
    def fuzz(req: models.FuzzRequest) -> models.FuzzResponse:
        return handlers.run_fuzz(req)

    @app.post("/oracle", response_model=models.OracleResponse)
    def oracle(req: models.OracleRequest) -> models.OracleResponse:
        return handlers.run_oracle(req)

    return app


app = create_app()
