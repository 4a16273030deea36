"""FastAPI application wiring for the decision service."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.staticfiles import StaticFiles

from ..pareto import entry_to_dict
from .schemas import AdvanceRequest, CommitActionRequest, CreateSessionRequest
from .sessions import ApiError, SessionStore


def _error_response(status: int, code: str, message: str,
                    detail=None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "detail": detail})


def create_app(state_dir: str | Path = "./service-state",
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="epiplan decision service")
    store = SessionStore(state_dir)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request,
                                exc: RequestValidationError):
        return _error_response(400, "invalid_payload",
                               "request body failed validation",
                               detail=exc.errors())

    @app.exception_handler(StarletteHTTPException)
    async def handle_http(request: Request, exc: StarletteHTTPException):
        return _error_response(exc.status_code, "http_error",
                               str(exc.detail))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        session = store.create(req)
        return session.summary()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.summary()

    @app.get("/sessions/{session_id}/regions/{region_id}/frontier")
    def get_frontier(session_id: str, region_id: str, request: Request):
        session = store.get(session_id)
        with session.lock:
            job = session.frontier_job(region_id)
            status = job.status
            if status == "failed":
                return _error_response(500, "planning_failed",
                                       "frontier planning failed",
                                       detail=job.error)
            if status == "pending":
                return JSONResponse(
                    status_code=202,
                    content={"status": "pending", "progress": job.progress})
            if request.headers.get("if-none-match") == job.etag:
                return Response(status_code=304,
                                headers={"ETag": job.etag})
            return Response(content=job.body, media_type="application/json",
                            headers={"ETag": job.etag})

    @app.get("/sessions/{session_id}/regions/{region_id}"
             "/policies/{entry_index}/bands")
    def get_bands(session_id: str, region_id: str, entry_index: int):
        session = store.get(session_id)
        with session.lock:
            job = session.jobs.get((session.current_day, region_id))
            if job is None or job.status != "ready":
                raise ApiError(409, "frontier_not_ready",
                               "fetch the frontier before requesting bands")
            entries = job.entries
            if not 0 <= entry_index < len(entries):
                raise ApiError(404, "unknown_policy",
                               f"no frontier entry {entry_index} "
                               f"(frontier has {len(entries)})")
            serialized = entry_to_dict(entries[entry_index])
            return {"day": session.current_day, "region_id": region_id,
                    "entry_index": entry_index,
                    "weight": serialized["weight"],
                    "policy": serialized["policy"],
                    "immediate_action": serialized["immediate_action"],
                    "bands": serialized["bands"]}

    @app.post("/sessions/{session_id}/regions/{region_id}/action")
    def commit_action(session_id: str, region_id: str,
                      req: CommitActionRequest):
        session = store.get(session_id)
        with session.lock:
            ack = session.commit_action(region_id, req.action)
            store.persist(session)
        return ack

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str, req: AdvanceRequest):
        session = store.get(session_id)
        with session.lock:
            result = session.advance(req.mode, req.observations)
            store.persist(session)
        return result

    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
