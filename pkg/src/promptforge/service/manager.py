"""Session lifecycle: creation, per-session locking, persistence, replay."""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..backends import BackendConfig, config_from_dict, scripted
from ..chatstore import Message
from ..ingest import UserData, load_user_data
from ..orchestrator import (
    NotEnded,
    Session,
    Stage,
    StageKind,
    attach_data,
    finalize,
    post_user_message,
)
from ..promptkit import Instruction, TARGET_TEMPLATES, register_accepted
from ..templates import TemplateLibrary
from .. import evalsuite
from .events import CorruptLog, EventLog


class ServiceError(Exception):
    pass


class UnknownSession(ServiceError):
    pass


class SessionBusy(ServiceError):
    pass


class BadConfig(ServiceError):
    pass


@dataclass
class SessionEntry:
    session: Session
    log: EventLog
    config: dict
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_used: float = field(default_factory=time.time)


def _apply_stage(session: Session, label: str) -> None:
    session.stage = Stage.from_label(label)
    session.stage_history.append(label)


def replay_events(
    events: list[dict],
    chat_backend: BackendConfig | None = None,
    target_backend: BackendConfig | None = None,
    library: TemplateLibrary | None = None,
) -> Session:
    """Reconstruct a Session from its event history.

    Backend calls are never re-executed; their results are carried by the
    MessageAppended / OutputsGenerated events.
    """
    session: Session | None = None
    for event in events:
        kind, payload = event["kind"], event["payload"]
        if kind == "SessionCreated":
            template = TARGET_TEMPLATES[payload.get("template", "generic")]
            session = Session(
                chat_backend or scripted([]),
                target_backend or scripted([]),
                template,
                session_id=payload["session_id"],
                library=library,
            )
            if target_backend is None:
                session.target_backend.model_id = payload.get(
                    "target_model_id", "scripted"
                )
            session.transcript.on_append = None  # replay appends raw messages
            continue
        if session is None:
            raise CorruptLog(event["seq"], "first event must be SessionCreated")
        if kind == "DataLoaded":
            session.data = UserData.from_record(payload["data"])
            _apply_stage(session, payload["stage_after"])
        elif kind == "MessageAppended":
            msg = Message.from_record(payload)
            session.transcript.append_raw(msg)
            session.register_visible(msg)
        elif kind == "CallDispatched":
            for label in payload["stages_after"]:
                _apply_stage(session, label)
        elif kind == "InstructionPushed":
            session.instruction_history.append(
                Instruction(payload["text"], payload["version"],
                            payload["created_turn"])
            )
            session.iteration += 1
        elif kind == "OutputsGenerated":
            if payload.get("context") == "evaluation":
                session.eval_items = [
                    evalsuite.EvaluationItem.from_record(rec)
                    for rec in payload["items"]
                ]
            else:
                session.prompt_outputs = {
                    int(k): v for k, v in payload["outputs"].items()
                }
                session.accepted = []
                session.iteration_marker = payload["marker"]
        elif kind == "OutputAccepted":
            i = payload["example_num"]
            session.accepted = register_accepted(
                session.accepted, i, session.data.chat_examples[i - 1],
                payload["output"], payload["turn"],
            )
            session.accepted_history.append(
                next(e for e in session.accepted if e.example_num == i)
            )
        elif kind == "Ended":
            pass  # the stage transition arrives via CallDispatched
        elif kind == "RankingRecorded":
            idx = next(
                (n for n, it in enumerate(session.eval_items)
                 if it.item_id == payload["item_id"]),
                None,
            )
            if idx is None:
                raise CorruptLog(event["seq"],
                                 f"ranking for unknown item {payload['item_id']}")
            session.eval_items[idx] = evalsuite.record_ranking(
                session.eval_items[idx], payload["best"], payload["worst"],
                overwrite=True,
            )
        elif kind == "SurveyRecorded":
            session.survey = tuple(payload["scores"])
        else:
            raise CorruptLog(event["seq"], f"unknown event kind {kind!r}")
    if session is None:
        raise ServiceError("empty event log")
    if events:
        session.chat_calls = events[-1]["chat_calls"]
        session.target_calls = events[-1]["target_calls"]
    return session


class SessionManager:
    """Holds live sessions, loading and replaying persisted ones on demand."""

    DEFAULT_IDLE_TTL = 24 * 3600.0

    def __init__(self, data_dir: str | Path,
                 library: TemplateLibrary | None = None,
                 idle_ttl: float = DEFAULT_IDLE_TTL):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.library = library or TemplateLibrary()
        self.idle_ttl = idle_ttl
        self._entries: dict[str, SessionEntry] = {}
        self._registry_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / session_id

    def create_session(self, config: dict) -> str:
        template_name = config.get("template", "generic")
        if template_name not in TARGET_TEMPLATES:
            raise BadConfig(f"unknown template {template_name!r}")
        try:
            chat_cfg = config_from_dict(config.get("chat_backend", {}))
            target_cfg = config_from_dict(config.get("target_backend", {}))
        except KeyError as exc:
            raise BadConfig(f"backend config missing field {exc}")
        except Exception as exc:
            raise BadConfig(str(exc))

        session_id = uuid.uuid4().hex
        sdir = self._session_dir(session_id)
        sdir.mkdir(parents=True)
        record = {
            "session_id": session_id,
            "created_at": time.time(),
            "status": "active",
            "template": template_name,
            "seed": config.get("seed", 0),
            "chat_backend": chat_cfg.digest(),
            "target_backend": target_cfg.digest(),
        }
        (sdir / "record.json").write_text(
            json.dumps(record, indent=2), encoding="utf-8"
        )
        # Full config (incl. scripted responses) kept for recovery. Remote
        # credentials are env-var names only and never appear here.
        (sdir / "config.json").write_text(
            json.dumps(config, indent=2), encoding="utf-8"
        )

        log = EventLog(sdir / "events.jsonl", session_id)
        session = Session(
            chat_cfg, target_cfg, TARGET_TEMPLATES[template_name],
            session_id=session_id, library=self.library,
            recorder=log.buffer,
        )
        session.record(
            "SessionCreated",
            {"session_id": session_id, "template": template_name,
             "seed": config.get("seed", 0),
             "target_model_id": target_cfg.model_id},
        )
        log.commit()
        with self._registry_lock:
            self._entries[session_id] = SessionEntry(session, log, config)
        return session_id

    def _load(self, session_id: str) -> SessionEntry:
        sdir = self._session_dir(session_id)
        if not (sdir / "events.jsonl").exists():
            raise UnknownSession(session_id)
        config = json.loads((sdir / "config.json").read_text(encoding="utf-8"))
        log = EventLog(sdir / "events.jsonl", session_id)
        events = log.read_recovered()
        consumed_chat = events[-1]["chat_calls"] if events else 0
        consumed_target = events[-1]["target_calls"] if events else 0
        chat_cfg = config_from_dict(config.get("chat_backend", {}),
                                    skip_responses=consumed_chat)
        target_cfg = config_from_dict(config.get("target_backend", {}),
                                      skip_responses=consumed_target)
        session = replay_events(events, chat_cfg, target_cfg, self.library)
        session.chat_calls = consumed_chat
        session.target_calls = consumed_target
        session.transcript.on_append = session._on_append
        session.recorder = log.buffer
        session.event_log = list(events)
        return SessionEntry(session, log, config)

    def entry(self, session_id: str) -> SessionEntry:
        with self._registry_lock:
            self._evict_idle(keep=session_id)
            if session_id not in self._entries:
                self._entries[session_id] = self._load(session_id)
            entry = self._entries[session_id]
            entry.last_used = time.time()
            return entry

    def _evict_idle(self, keep: str) -> None:
        """Drop idle in-memory sessions; their logs stay and reload on demand."""
        cutoff = time.time() - self.idle_ttl
        for sid in [
            sid for sid, e in self._entries.items()
            if sid != keep and e.last_used < cutoff and not e.lock.locked()
        ]:
            del self._entries[sid]

    def _run(self, session_id: str, fn):
        entry = self.entry(session_id)
        if not entry.lock.acquire(blocking=False):
            raise SessionBusy(session_id)
        try:
            result = fn(entry.session)
            entry.log.commit()
            return result
        except Exception:
            entry.log.abort()
            raise
        finally:
            entry.lock.release()

    # -- operations ------------------------------------------------------

    def upload_data(self, session_id: str, data: bytes, fmt: str | None,
                    seed: int, filename: str = "") -> dict:
        def op(session: Session) -> dict:
            user_data = load_user_data(data, fmt, seed, filename)
            messages = attach_data(session, user_data)
            return {
                "chat_example_count": len(user_data.chat_examples),
                "eval_example_count": len(user_data.eval_examples),
                "total_rows": user_data.total_rows,
                "selection_seed": user_data.selection_seed,
                "messages": messages,
            }

        return self._run(session_id, op)

    def post_message(self, session_id: str, text: str) -> list[dict]:
        return self._run(session_id, lambda s: post_user_message(s, text))

    def chat_view(self, session_id: str) -> dict:
        session = self.entry(session_id).session
        return {
            "session_id": session_id,
            "stage": session.stage.label(),
            "ended": session.stage.kind is StageKind.ENDED,
            "messages": list(session.visible_log),
        }

    def prompt_text(self, session_id: str, which: str) -> str:
        session = self.entry(session_id).session
        text = finalize(session)[f"{which}_prompt"]
        return text if text.endswith("\n") else text + "\n"

    def start_evaluation(self, session_id: str, seed: int) -> int:
        return self._run(
            session_id,
            lambda s: len(evalsuite.build_evaluation(s, seed)),
        )

    def evaluation_items(self, session_id: str) -> list[dict]:
        session = self.entry(session_id).session
        return [item.public_record() for item in session.eval_items]

    def record_item_ranking(self, session_id: str, item_id: str,
                            best: int, worst: int) -> None:
        def op(session: Session) -> None:
            for idx, item in enumerate(session.eval_items):
                if item.item_id == item_id:
                    session.eval_items[idx] = evalsuite.record_ranking(
                        item, best, worst
                    )
                    session.record(
                        "RankingRecorded",
                        {"item_id": item_id, "best": best, "worst": worst},
                    )
                    return
            raise UnknownSession(f"no evaluation item {item_id!r}")

        return self._run(session_id, op)

    def evaluation_results(self, session_id: str) -> dict:
        session = self.entry(session_id).session
        return evalsuite.aggregate(session.eval_items)

    def record_survey(self, session_id: str, scores: list[int]) -> None:
        if len(scores) != 4:
            raise BadConfig("the survey takes exactly four scores")
        response = evalsuite.SurveyResponse(*scores)

        def op(session: Session) -> None:
            evalsuite.record_survey(session, response)

        return self._run(session_id, op)
