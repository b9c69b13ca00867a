"""Event log durability, session replay, and the HTTP facade."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from promptforge.evalsuite import PROVENANCES
from promptforge.service.app import create_app
from promptforge.service.events import CorruptLog, EventLog
from promptforge.service.manager import (
    SessionBusy,
    SessionManager,
    UnknownSession,
    replay_events,
)

from tests.conftest import (
    ONE_ITERATION_USER_TURNS,
    csv_bytes,
    one_iteration_chat_script,
)

N_EVAL = 8


def _config(chat_script=None, target_script=None):
    if chat_script is None:
        chat_script = one_iteration_chat_script()
    if target_script is None:
        target_script = ["out-1", "out-2", "out-3"] + [
            f"cand-{i}-{p}" for i in range(N_EVAL) for p in PROVENANCES
        ]
    return {
        "template": "generic",
        "seed": 0,
        "chat_backend": {"kind": "scripted", "responses": chat_script},
        "target_backend": {"kind": "scripted", "responses": target_script,
                           "model_id": "target-model"},
    }


def _data_bytes():
    return csv_bytes([f"document {i} about topic {i}" for i in range(3 + N_EVAL)])


def _drive_to_end(manager: SessionManager, session_id: str) -> None:
    manager.upload_data(session_id, _data_bytes(), "csv", 0, "data.csv")
    for turn in ONE_ITERATION_USER_TURNS:
        manager.post_message(session_id, turn)


@pytest.fixture
def manager(tmp_path):
    return SessionManager(tmp_path / "sessions")


# -- event log -------------------------------------------------------------


def test_event_log_commit_boundary(tmp_path):
    log = EventLog(tmp_path / "e.jsonl", "sid")
    log.buffer({"kind": "A", "payload": {}})
    log.buffer({"kind": "B", "payload": {}})
    assert log.commit() == 2
    events = log.read()
    assert [e["boundary"] for e in events] == [False, True]
    assert [e["seq"] for e in events] == [1, 2]


def test_event_log_abort_discards(tmp_path):
    log = EventLog(tmp_path / "e.jsonl", "sid")
    log.buffer({"kind": "A", "payload": {}})
    log.abort()
    assert log.commit() == 0
    assert log.read() == []


def test_event_log_seq_continues_across_reopen(tmp_path):
    path = tmp_path / "e.jsonl"
    log = EventLog(path, "sid")
    log.buffer({"kind": "A", "payload": {}})
    log.commit()
    log2 = EventLog(path, "sid")
    log2.buffer({"kind": "B", "payload": {}})
    log2.commit()
    assert [e["seq"] for e in log2.read()] == [1, 2]


def test_event_log_detects_gap(tmp_path):
    path = tmp_path / "e.jsonl"
    rec = {"seq": 2, "session_id": "s", "kind": "A", "payload": {},
           "chat_calls": 0, "target_calls": 0, "boundary": True, "ts": 0}
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(CorruptLog):
        EventLog(path, "s").read()


def test_event_log_detects_garbage(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("not json\n")
    with pytest.raises(CorruptLog):
        EventLog(path, "s").read()


def test_read_recovered_truncates_to_boundary(tmp_path):
    log = EventLog(tmp_path / "e.jsonl", "sid")
    log.buffer({"kind": "A", "payload": {}})
    log.buffer({"kind": "B", "payload": {}})
    log.commit()
    # simulate a crash mid-operation: one event written without its boundary
    with open(log.path, "a") as fh:
        fh.write(json.dumps({
            "seq": 3, "session_id": "sid", "kind": "C", "payload": {},
            "chat_calls": 0, "target_calls": 0, "boundary": False, "ts": 0,
        }) + "\n")
    recovered = EventLog(log.path, "sid").read_recovered()
    assert [e["kind"] for e in recovered] == ["A", "B"]


# -- manager lifecycle and replay ------------------------------------------


def test_full_session_through_manager(manager):
    sid = manager.create_session(_config())
    result = manager.upload_data(sid, _data_bytes(), "csv", 0, "data.csv")
    assert result["chat_example_count"] == 3
    assert result["eval_example_count"] == N_EVAL
    assert result["messages"][0]["role"] == "assistant"
    for turn in ONE_ITERATION_USER_TURNS:
        manager.post_message(sid, turn)
    view = manager.chat_view(sid)
    assert view["ended"] is True
    assert view["stage"] == "ended"
    zs = manager.prompt_text(sid, "zs")
    fs = manager.prompt_text(sid, "fs")
    assert zs.endswith("\n") and fs.endswith("\n")
    assert "Summarize the key facts briefly." in zs
    assert "out-2" in fs


def test_unknown_session(manager):
    with pytest.raises(UnknownSession):
        manager.post_message("nope", "hi")


def test_replay_matches_live_state(manager):
    sid = manager.create_session(_config())
    _drive_to_end(manager, sid)
    manager.start_evaluation(sid, seed=3)
    manager.record_item_ranking(sid, "item-1", best=0, worst=2)
    manager.record_survey(sid, [5, 4, 3, 5])
    live = manager.entry(sid).session

    fresh = SessionManager(manager.data_dir, library=manager.library)
    replayed = fresh.entry(sid).session
    assert replayed.state_dict() == live.state_dict()
    assert [it.to_record() for it in replayed.eval_items] == \
        [it.to_record() for it in live.eval_items]
    assert replayed.chat_calls == live.chat_calls
    assert replayed.target_calls == live.target_calls


def test_replay_midway_can_continue(manager):
    """Recovery after only some turns leaves the session resumable: the
    scripted backends pick up at the first unconsumed response."""
    sid = manager.create_session(_config())
    manager.upload_data(sid, _data_bytes(), "csv", 0, "data.csv")
    for turn in ONE_ITERATION_USER_TURNS[:3]:
        manager.post_message(sid, turn)

    fresh = SessionManager(manager.data_dir, library=manager.library)
    for turn in ONE_ITERATION_USER_TURNS[3:]:
        fresh.post_message(sid, turn)
    assert fresh.chat_view(sid)["ended"] is True

    # the stitched run equals an uninterrupted one
    control = SessionManager(manager.data_dir.parent / "control")
    cid = control.create_session(_config())
    _drive_to_end(control, cid)
    a = fresh.entry(sid).session.state_dict()
    b = control.entry(cid).session.state_dict()
    a.pop("id"), b.pop("id")
    assert a == b


def test_crash_at_every_boundary_recovers(manager, tmp_path):
    """Truncating the log after any committed prefix must still replay."""
    sid = manager.create_session(_config())
    _drive_to_end(manager, sid)
    manager.start_evaluation(sid, seed=0)
    log_path = manager.data_dir / sid / "events.jsonl"
    lines = log_path.read_text().splitlines()

    for cut in range(1, len(lines) + 1):
        trial_dir = tmp_path / f"trial-{cut}"
        (trial_dir / sid).mkdir(parents=True)
        for name in ("record.json", "config.json"):
            (trial_dir / sid / name).write_text(
                (manager.data_dir / sid / name).read_text()
            )
        (trial_dir / sid / "events.jsonl").write_text(
            "\n".join(lines[:cut]) + "\n"
        )
        fresh = SessionManager(trial_dir)
        session = fresh.entry(sid).session  # replay must not raise
        events = json.loads(lines[cut - 1])
        # consumed-call counters never exceed what the log claims
        assert session.chat_calls <= events["chat_calls"]
        assert session.target_calls <= events["target_calls"]


def test_session_busy(manager):
    sid = manager.create_session(_config())
    entry = manager.entry(sid)
    entry.lock.acquire()
    try:
        with pytest.raises(SessionBusy):
            manager.post_message(sid, "hi")
    finally:
        entry.lock.release()


def test_no_credentials_persisted(manager, monkeypatch):
    monkeypatch.setenv("SCAN_TOKEN_VAR", "super-secret-credential")
    config = {
        "template": "generic",
        "chat_backend": {"kind": "remote", "model_id": "m",
                         "endpoint": "http://example.invalid/v1",
                         "auth_env_name": "SCAN_TOKEN_VAR"},
        "target_backend": {"kind": "scripted", "responses": []},
    }
    sid = manager.create_session(config)
    for path in (manager.data_dir / sid).rglob("*"):
        if path.is_file():
            assert "super-secret-credential" not in path.read_text()


def test_idle_sessions_evicted_then_reloaded(tmp_path):
    manager = SessionManager(tmp_path / "s", idle_ttl=0.0)
    sid = manager.create_session(_config())
    manager.upload_data(sid, _data_bytes(), "csv", 0, "d.csv")
    live = manager.entry(sid).session
    # touching another session evicts the idle one from memory
    other = manager.create_session(_config())
    manager.entry(other)
    assert sid not in manager._entries
    # and it transparently reloads from its log, resumable
    manager.post_message(sid, ONE_ITERATION_USER_TURNS[0])
    reloaded = manager.entry(sid).session
    assert reloaded is not live
    assert reloaded.stage.label() == "initial_discussion"


def test_replay_rejects_headless_log():
    with pytest.raises(CorruptLog):
        replay_events([
            {"seq": 1, "kind": "Ended", "payload": {},
             "chat_calls": 0, "target_calls": 0},
        ])


# -- HTTP facade -----------------------------------------------------------


@pytest.fixture
def client(manager):
    return TestClient(create_app(manager))


def _create(client, config=None):
    resp = client.post("/sessions", json=config or _config())
    assert resp.status_code == 200
    return resp.json()["session_id"]


def _upload(client, sid):
    return client.post(
        f"/sessions/{sid}/data",
        params={"format": "csv", "seed": 0},
        files={"file": ("data.csv", _data_bytes(), "text/csv")},
    )


def _finish(client, sid):
    _upload(client, sid)
    for turn in ONE_ITERATION_USER_TURNS:
        client.post(f"/sessions/{sid}/messages", json={"text": turn})


def test_http_happy_path(client):
    sid = _create(client)
    up = _upload(client, sid)
    assert up.status_code == 200
    assert up.json()["chat_example_count"] == 3

    first = client.post(f"/sessions/{sid}/messages",
                        json={"text": "Focus on the key facts."})
    assert first.status_code == 200
    assert first.json()["messages"][-1]["role"] == "assistant"

    for turn in ONE_ITERATION_USER_TURNS[1:]:
        assert client.post(f"/sessions/{sid}/messages",
                           json={"text": turn}).status_code == 200

    chat = client.get(f"/sessions/{sid}/chat")
    assert chat.json()["ended"] is True

    zs = client.get(f"/sessions/{sid}/prompt/zs")
    assert zs.status_code == 200
    assert "attachment" in zs.headers["content-disposition"]
    assert "Summarize the key facts briefly." in zs.text

    fs = client.get(f"/sessions/{sid}/prompt/fs")
    assert "out-3" in fs.text


def test_http_evaluation_flow(client):
    sid = _create(client)
    _finish(client, sid)

    start = client.post(f"/sessions/{sid}/evaluation/start", json={"seed": 1})
    assert start.status_code == 200
    assert start.json()["item_count"] == N_EVAL

    items = client.get(f"/sessions/{sid}/evaluation/items").json()["items"]
    assert len(items) == N_EVAL
    dumped = json.dumps(items)
    for p in PROVENANCES:
        assert f'"{p}"' not in dumped  # blindness holds over the wire

    results = client.get(f"/sessions/{sid}/evaluation/results")
    assert results.status_code == 400  # nothing ranked yet

    for item in items:
        resp = client.post(
            f"/sessions/{sid}/evaluation/items/{item['item_id']}/ranking",
            json={"best": 0, "worst": 1},
        )
        assert resp.status_code == 200

    results = client.get(f"/sessions/{sid}/evaluation/results")
    assert results.status_code == 200
    tally = results.json()
    assert set(tally) == set(PROVENANCES)
    assert sum(tally[p]["best"] for p in PROVENANCES) == N_EVAL


def test_http_ranking_conflicts(client):
    sid = _create(client)
    _finish(client, sid)
    client.post(f"/sessions/{sid}/evaluation/start", json={"seed": 0})

    same = client.post(f"/sessions/{sid}/evaluation/items/item-1/ranking",
                       json={"best": 1, "worst": 1})
    assert same.status_code == 400

    ok = client.post(f"/sessions/{sid}/evaluation/items/item-1/ranking",
                     json={"best": 0, "worst": 2})
    assert ok.status_code == 200
    again = client.post(f"/sessions/{sid}/evaluation/items/item-1/ranking",
                        json={"best": 2, "worst": 0})
    assert again.status_code == 409


def test_http_survey(client):
    sid = _create(client)
    _finish(client, sid)
    ok = client.post(f"/sessions/{sid}/survey", json={"scores": [5, 4, 4, 5]})
    assert ok.status_code == 200
    dup = client.post(f"/sessions/{sid}/survey", json={"scores": [1, 1, 1, 1]})
    assert dup.status_code == 409
    bad = client.post(f"/sessions/{sid}/survey", json={"scores": [9, 1, 1, 1]})
    assert bad.status_code == 400


def test_http_error_codes(client, manager):
    assert client.get("/sessions/missing/chat").status_code == 404

    bad_cfg = client.post("/sessions", json={"template": "no-such-template"})
    assert bad_cfg.status_code == 400

    sid = _create(client)
    too_small = client.post(
        f"/sessions/{sid}/data",
        params={"format": "csv"},
        files={"file": ("d.csv", csv_bytes(["a", "b"]), "text/csv")},
    )
    assert too_small.status_code == 400

    # prompt downloads refuse before the session ends
    sid2 = _create(client)
    _upload(client, sid2)
    assert client.get(f"/sessions/{sid2}/prompt/zs").status_code == 409
    assert client.post(f"/sessions/{sid2}/evaluation/start",
                       json={"seed": 0}).status_code == 409


def test_http_busy_returns_409(client, manager):
    sid = _create(client)
    _upload(client, sid)
    entry = manager.entry(sid)
    entry.lock.acquire()
    try:
        resp = client.post(f"/sessions/{sid}/messages", json={"text": "hi"})
        assert resp.status_code == 409
    finally:
        entry.lock.release()


def test_http_survey_wrong_arity(client):
    sid = _create(client)
    _finish(client, sid)
    resp = client.post(f"/sessions/{sid}/survey", json={"scores": [3, 3]})
    assert resp.status_code == 400
