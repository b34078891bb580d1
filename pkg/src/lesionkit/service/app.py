"""HTTP layer: FastAPI app exposing the interactive session API under /v1."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..errors import (
    BoundsError,
    LesionKitError,
    NotFoundError,
    SchemaError,
)
from .sessions import SessionService

_STATUS_FOR = {
    NotFoundError: 404,
    BoundsError: 400,
    SchemaError: 400,
}


class CreateSessionRequest(BaseModel):
    case_id: str | None = None
    upload: dict | None = None


class ClickRequest(BaseModel):
    coord: list[int] = Field(min_length=3, max_length=3)
    label: str


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="lesionkit session service", version="1.0")
    app.state.service = service

    @app.exception_handler(LesionKitError)
    async def _domain_error(request: Request, exc: LesionKitError):
        status = 500
        for klass, code in _STATUS_FOR.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "detail": type(exc).__name__},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "validation", "message": "invalid request payload", "detail": exc.errors()},
        )

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/cases")
    def list_cases():
        return service.list_cases()

    @app.post("/v1/sessions")
    def create_session(body: CreateSessionRequest):
        return service.create_session(case_id=body.case_id, upload=body.upload)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return service.summary(session_id)

    @app.post("/v1/sessions/{session_id}/clicks")
    def apply_click(session_id: str, body: ClickRequest):
        return service.apply_click(session_id, body.coord, body.label)

    @app.post("/v1/sessions/{session_id}/undo")
    def undo(session_id: str):
        return service.undo(session_id)

    @app.get("/v1/sessions/{session_id}/slices/{axis}/{index}")
    def get_slice(session_id: str, axis: str, index: int):
        return service.get_slice(session_id, axis, index)

    return app
