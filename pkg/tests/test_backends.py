"""Backend behavior: scripted determinism, remote retries, credential hygiene."""

import json
import threading

import pytest

from promptforge.backends import (
    BackendConfig,
    BackendError,
    BackendTimeout,
    ChatRequest,
    GenerationParams,
    ProviderError,
    ScriptExhausted,
    TransportError,
    complete,
    config_from_dict,
    scripted,
)


def _req(*contents: str) -> ChatRequest:
    return ChatRequest(messages=[{"role": "user", "content": c} for c in contents])


def test_scripted_replays_in_order():
    cfg = scripted(["a", "b", "c"])
    assert complete(cfg, _req("1")).content == "a"
    assert complete(cfg, _req("2")).content == "b"
    assert complete(cfg, _req("3")).content == "c"


def test_scripted_exhaustion():
    cfg = scripted(["only"])
    complete(cfg, _req("x"))
    with pytest.raises(ScriptExhausted):
        complete(cfg, _req("y"))


def test_scripted_records_requests_deeply():
    cfg = scripted(["a"])
    req = _req("hello")
    complete(cfg, req)
    req.messages[0]["content"] = "mutated afterwards"
    assert cfg.script.recorded_requests[0].messages[0]["content"] == "hello"


def test_empty_request_rejected():
    with pytest.raises(ValueError):
        complete(scripted(["a"]), ChatRequest(messages=[]))


def test_remote_requires_endpoint():
    with pytest.raises(ValueError):
        BackendConfig(kind="remote", model_id="m", endpoint=None)


def test_config_from_dict_scripted_skip():
    cfg = config_from_dict({"kind": "scripted", "responses": ["a", "b", "c"]},
                           skip_responses=2)
    assert complete(cfg, _req("x")).content == "c"
    with pytest.raises(ScriptExhausted):
        complete(cfg, _req("y"))


def test_config_from_dict_unknown_kind():
    with pytest.raises(BackendError):
        config_from_dict({"kind": "telepathy"})


def test_digest_never_contains_credentials(monkeypatch):
    monkeypatch.setenv("FAKE_API_TOKEN", "sk-secret-value-123")
    cfg = BackendConfig(kind="remote", model_id="m",
                        endpoint="http://example.invalid/v1/chat",
                        auth_env_name="FAKE_API_TOKEN")
    dumped = json.dumps(cfg.digest())
    assert "sk-secret-value-123" not in dumped
    assert "FAKE_API_TOKEN" not in dumped  # digest carries endpoint/model only


class _FakeServer:
    """Minimal in-process HTTP server driven by a queue of canned replies."""

    def __init__(self, replies):
        import http.server

        self.replies = list(replies)
        self.requests = []
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                outer.requests.append(
                    (dict(self.headers), json.loads(body or b"{}"))
                )
                status, payload = outer.replies.pop(0)
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *a):
                pass

        self.httpd = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        self.port = self.httpd.server_address[1]
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self):
        return f"http://127.0.0.1:{self.port}/v1/chat/completions"

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def _ok_payload(content: str) -> dict:
    return {
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 5},
    }


@pytest.fixture
def remote_cfg_factory():
    servers = []

    def make(replies, **overrides):
        server = _FakeServer(replies)
        servers.append(server)
        cfg = BackendConfig(kind="remote", model_id="test-model",
                            endpoint=server.url, timeout=5.0, **overrides)
        return server, cfg

    yield make
    for s in servers:
        s.close()


def test_remote_success(remote_cfg_factory):
    server, cfg = remote_cfg_factory([(200, _ok_payload("hi there"))])
    out = complete(cfg, _req("hello"))
    assert out.content == "hi there"
    assert out.prompt_units == 12 and out.completion_units == 5
    headers, body = server.requests[0]
    assert body["model"] == "test-model"
    assert body["messages"] == [{"role": "user", "content": "hello"}]
    assert body["temperature"] == 0.0 and body["seed"] == 0


def test_remote_sends_bearer_token(remote_cfg_factory, monkeypatch):
    monkeypatch.setenv("TEST_TOKEN_VAR", "tok-abc")
    server, cfg = remote_cfg_factory([(200, _ok_payload("ok"))],
                                     auth_env_name="TEST_TOKEN_VAR")
    complete(cfg, _req("x"))
    headers, _ = server.requests[0]
    assert headers.get("Authorization") == "Bearer tok-abc"


def test_remote_provider_error_not_retried(remote_cfg_factory):
    server, cfg = remote_cfg_factory([(500, {"error": "boom"})])
    with pytest.raises(ProviderError) as exc:
        complete(cfg, _req("x"))
    assert exc.value.status == 500
    assert len(server.requests) == 1  # HTTP-level failures are not retried


def test_remote_transport_retry_then_success(monkeypatch):
    """Connection-level failures retry on the 0.5s/2s schedule."""
    import httpx

    from promptforge import backends

    sleeps = []
    monkeypatch.setattr(backends.time, "sleep", sleeps.append)

    attempts = []

    def fake_post(url, json=None, headers=None, timeout=None):
        attempts.append(url)
        if len(attempts) < 3:
            raise httpx.ConnectError("refused")
        return httpx.Response(
            200, json=_ok_payload("finally"),
            request=httpx.Request("POST", url),
        )

    monkeypatch.setattr(backends.httpx, "post", fake_post)
    cfg = BackendConfig(kind="remote", model_id="m",
                        endpoint="http://example.invalid/v1/chat")
    assert complete(cfg, _req("x")).content == "finally"
    assert sleeps == [0.5, 2.0]


def test_remote_transport_gives_up_after_three(monkeypatch):
    import httpx

    from promptforge import backends

    monkeypatch.setattr(backends.time, "sleep", lambda s: None)
    calls = []

    def fake_post(url, **kw):
        calls.append(url)
        raise httpx.ConnectError("refused")

    monkeypatch.setattr(backends.httpx, "post", fake_post)
    cfg = BackendConfig(kind="remote", model_id="m",
                        endpoint="http://example.invalid/v1/chat")
    with pytest.raises(TransportError):
        complete(cfg, _req("x"))
    assert len(calls) == 3


def test_remote_timeout_is_terminal(monkeypatch):
    import httpx

    from promptforge import backends

    def fake_post(url, **kw):
        raise httpx.ReadTimeout("too slow")

    monkeypatch.setattr(backends.httpx, "post", fake_post)
    cfg = BackendConfig(kind="remote", model_id="m",
                        endpoint="http://example.invalid/v1/chat")
    with pytest.raises(BackendTimeout):
        complete(cfg, _req("x"))


def test_generation_params_defaults():
    p = GenerationParams()
    assert (p.temperature, p.max_tokens, p.seed) == (0.0, 1024, 0)
