"""HTTP facade over the job runner.

POST /jobs/run takes a RunRequest and always answers 200 with a
RunResponse; job-level failures are encoded in exit_code/error so that
clients get one uniform shape.  Malformed request bodies are rejected by
FastAPI itself with a 422 carrying pydantic's field locations.
"""
from __future__ import annotations

from fastapi import FastAPI

from .jobs import TOOL_VERSION, execute
from .schemas import RunRequest, RunResponse


def create_app() -> FastAPI:
    app = FastAPI(title="levy-conditioner", version=TOOL_VERSION)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": TOOL_VERSION}

    @app.post("/jobs/run", response_model=RunResponse)
    def run_job(request: RunRequest) -> RunResponse:
        return execute(request)

    return app


app = create_app()
