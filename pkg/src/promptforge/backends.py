"""Chat-completion backends: a deterministic scripted backend for tests and a
remote HTTP backend speaking the common chat-completions message-array schema.
"""

from __future__ import annotations

import copy
import os
import time
from dataclasses import dataclass, field

import httpx

RETRY_BACKOFFS = (0.5, 2.0)
DEFAULT_TIMEOUT = 120.0


class BackendError(Exception):
    pass


class ScriptExhausted(BackendError):
    pass


class TransportError(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class ProviderError(BackendError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned {status}: {body[:500]}")
        self.status = status
        self.body = body


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = 0


@dataclass
class ChatRequest:
    messages: list[dict[str, str]]  # each {"role": ..., "content": ...}


@dataclass(frozen=True)
class Completion:
    content: str
    prompt_units: int | None = None
    completion_units: int | None = None
    latency: float = 0.0


class ScriptedQueue:
    """Queued responses plus a record of every request received."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.cursor = 0
        self.recorded_requests: list[ChatRequest] = []

    @property
    def remaining(self) -> int:
        return len(self.responses) - self.cursor

    def pop(self, req: ChatRequest) -> str:
        self.recorded_requests.append(copy.deepcopy(req))
        if self.cursor >= len(self.responses):
            raise ScriptExhausted(
                f"scripted backend exhausted after {self.cursor} responses"
            )
        content = self.responses[self.cursor]
        self.cursor += 1
        return content


@dataclass
class BackendConfig:
    kind: str = "scripted"  # "scripted" | "remote"
    model_id: str = "scripted"
    endpoint: str | None = None
    auth_env_name: str | None = None
    params: GenerationParams = field(default_factory=GenerationParams)
    script: ScriptedQueue | None = None
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.kind == "remote" and not (self.endpoint and self.model_id):
            raise ValueError("remote backends require endpoint and model_id")

    def digest(self) -> dict:
        # No credential material: only the env var *name* is ever recorded.
        return {"kind": self.kind, "model_id": self.model_id,
                "endpoint": self.endpoint}


def scripted(responses: list[str], model_id: str = "scripted") -> BackendConfig:
    """A deterministic backend that replays the given responses in order."""
    return BackendConfig(kind="scripted", model_id=model_id,
                         script=ScriptedQueue(responses))


def config_from_dict(spec: dict, skip_responses: int = 0) -> BackendConfig:
    """Build a BackendConfig from a JSON-friendly spec.

    ``skip_responses`` drops already-consumed responses when rebuilding a
    scripted backend during session recovery.
    """
    kind = spec.get("kind", "scripted")
    if kind == "scripted":
        responses = list(spec.get("responses", []))[skip_responses:]
        return scripted(responses, model_id=spec.get("model_id", "scripted"))
    if kind == "remote":
        params = spec.get("params", {})
        return BackendConfig(
            kind="remote",
            model_id=spec["model_id"],
            endpoint=spec["endpoint"],
            auth_env_name=spec.get("auth_env_name"),
            params=GenerationParams(
                temperature=params.get("temperature", 0.0),
                max_tokens=params.get("max_tokens", 1024),
                seed=params.get("seed", 0),
            ),
        )
    raise BackendError(f"unknown backend kind {kind!r}")


def _remote_complete(cfg: BackendConfig, req: ChatRequest) -> Completion:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_env_name:
        token = os.environ.get(cfg.auth_env_name)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": cfg.model_id,
        "messages": req.messages,
        "temperature": cfg.params.temperature,
        "max_tokens": cfg.params.max_tokens,
    }
    if cfg.params.seed is not None:
        body["seed"] = cfg.params.seed

    last_exc: Exception | None = None
    for attempt in range(len(RETRY_BACKOFFS) + 1):
        if attempt > 0:
            time.sleep(RETRY_BACKOFFS[attempt - 1])
        start = time.monotonic()
        try:
            resp = httpx.post(cfg.endpoint, json=body, headers=headers,
                              timeout=cfg.timeout)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            last_exc = exc
            continue
        if resp.status_code // 100 != 2:
            raise ProviderError(resp.status_code, resp.text)
        data = resp.json()
        usage = data.get("usage", {}) or {}
        return Completion(
            content=data["choices"][0]["message"]["content"],
            prompt_units=usage.get("prompt_tokens"),
            completion_units=usage.get("completion_tokens"),
            latency=time.monotonic() - start,
        )
    raise TransportError(
        f"transport failed after {len(RETRY_BACKOFFS) + 1} attempts: {last_exc}"
    )


def complete(cfg: BackendConfig, req: ChatRequest) -> Completion:
    """Perform one chat completion. Never mutates ``req``."""
    if not req.messages:
        raise ValueError("ChatRequest must contain at least one message")
    if cfg.kind == "scripted":
        if cfg.script is None:
            raise BackendError("scripted backend has no script attached")
        start = time.monotonic()
        content = cfg.script.pop(req)
        return Completion(content=content, latency=time.monotonic() - start)
    if cfg.kind == "remote":
        return _remote_complete(cfg, req)
    raise BackendError(f"unknown backend kind {cfg.kind!r}")
