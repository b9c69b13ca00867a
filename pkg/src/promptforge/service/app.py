"""HTTP facade. All workflow logic lives in the orchestrator and evalsuite
modules; this layer only translates requests, errors, and serialization.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel

from ..backends import BackendError
from ..chatstore import ChatStoreError
from ..evalsuite import (
    AlreadyRanked,
    Duplicate,
    EvalError,
    NoEvalExamples,
    OutOfRange,
    SamePosition,
    UnrankedItems,
)
from ..ingest import IngestError
from ..orchestrator import NotEnded, OrchestratorError, StageViolation
from .manager import BadConfig, ServiceError, SessionBusy, SessionManager, UnknownSession

_STATIC_DIR = Path(__file__).resolve().parents[3] / "frontend" / "dist"


class MessageIn(BaseModel):
    text: str


class RankingIn(BaseModel):
    best: int
    worst: int


class EvaluationStartIn(BaseModel):
    seed: int = 0


class SurveyIn(BaseModel):
    scores: list[int]


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, UnknownSession):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, SessionBusy):
        return HTTPException(status_code=409, detail="session busy")
    if isinstance(exc, (AlreadyRanked, Duplicate)):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, (NotEnded, StageViolation)):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(
        exc,
        (BadConfig, IngestError, EvalError, OutOfRange, SamePosition,
         NoEvalExamples, UnrankedItems, ChatStoreError, OrchestratorError,
         ServiceError),
    ):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, BackendError):
        return HTTPException(status_code=502, detail=str(exc))
    raise exc


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="prompt refinement service")

    def guarded(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:  # translated, or re-raised by _http_error
            raise _http_error(exc)

    @app.post("/sessions")
    def create_session(config: dict):
        return {"session_id": guarded(manager.create_session, config)}

    @app.post("/sessions/{session_id}/data")
    def upload_data(
        session_id: str,
        file: UploadFile = File(...),
        format: str | None = None,
        seed: int = 0,
    ):
        payload = file.file.read()
        return guarded(
            manager.upload_data, session_id, payload, format, seed,
            file.filename or "",
        )

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        return {"messages": guarded(manager.post_message, session_id, body.text)}

    @app.get("/sessions/{session_id}/chat")
    def chat(session_id: str):
        return guarded(manager.chat_view, session_id)

    @app.get("/sessions/{session_id}/prompt/fs")
    def prompt_fs(session_id: str):
        text = guarded(manager.prompt_text, session_id, "fs")
        return PlainTextResponse(
            text,
            headers={"Content-Disposition":
                     'attachment; filename="fs_prompt.txt"'},
        )

    @app.get("/sessions/{session_id}/prompt/zs")
    def prompt_zs(session_id: str):
        text = guarded(manager.prompt_text, session_id, "zs")
        return PlainTextResponse(
            text,
            headers={"Content-Disposition":
                     'attachment; filename="zs_prompt.txt"'},
        )

    @app.post("/sessions/{session_id}/evaluation/start")
    def evaluation_start(session_id: str, body: EvaluationStartIn):
        return {"item_count":
                guarded(manager.start_evaluation, session_id, body.seed)}

    @app.get("/sessions/{session_id}/evaluation/items")
    def evaluation_items(session_id: str):
        return {"items": guarded(manager.evaluation_items, session_id)}

    @app.post("/sessions/{session_id}/evaluation/items/{item_id}/ranking")
    def record_ranking(session_id: str, item_id: str, body: RankingIn):
        guarded(manager.record_item_ranking, session_id, item_id,
                body.best, body.worst)
        return {"ok": True}

    @app.get("/sessions/{session_id}/evaluation/results")
    def evaluation_results(session_id: str):
        return guarded(manager.evaluation_results, session_id)

    @app.post("/sessions/{session_id}/survey")
    def survey(session_id: str, body: SurveyIn):
        guarded(manager.record_survey, session_id, body.scores)
        return {"ok": True}

    if _STATIC_DIR.is_dir():
        from fastapi.staticfiles import StaticFiles

        @app.get("/")
        def index():
            return FileResponse(_STATIC_DIR / "index.html")

        app.mount("/static", StaticFiles(directory=_STATIC_DIR), name="static")

    return app
