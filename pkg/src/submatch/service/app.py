"""HTTP front end. Run with ``submatch serve`` or ``uvicorn submatch.service.app:app``."""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from . import handlers, schemas
from .handlers import ServiceError


def create_app() -> FastAPI:
    app = FastAPI(title="submatch", version=__version__)

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status_code, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest):
        return handlers.ingest(req)

    @app.post("/partition", response_model=schemas.PartitionResponse)
    def partition(req: schemas.PartitionRequest):
        return handlers.partition(req)

    @app.post("/plan", response_model=schemas.PlanResponse)
    def plan(req: schemas.PlanRequest):
        return handlers.plan(req)

    @app.post("/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        return handlers.run(req)

    @app.post("/verify", response_model=schemas.VerifyResponse)
    def verify(req: schemas.VerifyRequest):
        return handlers.verify_corpus(req)

    @app.post("/stats", response_model=schemas.StatsResponse)
    def stats(req: schemas.StatsRequest):
        return handlers.graph_stats(req)

    return app


app = create_app()
