"""Append-only per-session event logs with atomic-per-operation commits.

Events buffered during one operation are written together; the last event of
the batch carries ``boundary: true``. Recovery discards any trailing events
after the last boundary marker, so a crash mid-operation rolls the session
back to the previous operation boundary.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path


class EventLogError(Exception):
    pass


class CorruptLog(EventLogError):
    def __init__(self, seq: int, detail: str):
        super().__init__(f"corrupt event log at seq {seq}: {detail}")
        self.seq = seq


class EventLog:
    """File-backed event log for one session."""

    def __init__(self, path: str | Path, session_id: str):
        self.path = Path(path)
        self.session_id = session_id
        self._next_seq = 1
        self._buffer: list[dict] = []
        if self.path.exists():
            events = self.read()
            if events:
                self._next_seq = events[-1]["seq"] + 1

    def buffer(self, event: dict) -> None:
        """Queue one event for the current operation (not yet durable)."""
        self._buffer.append(dict(event))

    def commit(self) -> int:
        """Write all buffered events, marking the last as an op boundary."""
        if not self._buffer:
            return 0
        lines = []
        for i, event in enumerate(self._buffer):
            record = {
                "seq": self._next_seq,
                "session_id": self.session_id,
                "kind": event["kind"],
                "payload": event["payload"],
                "chat_calls": event.get("chat_calls", 0),
                "target_calls": event.get("target_calls", 0),
                "boundary": i == len(self._buffer) - 1,
                "ts": time.time(),
            }
            lines.append(json.dumps(record, ensure_ascii=False))
            self._next_seq += 1
        written = len(self._buffer)
        self._buffer = []
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return written

    def abort(self) -> None:
        self._buffer = []

    def read(self) -> list[dict]:
        """All committed events, validating that seq numbers have no gaps."""
        if not self.path.exists():
            return []
        events = []
        expected = 1
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorruptLog(expected, f"unparseable line: {exc.msg}")
                if record["seq"] != expected:
                    raise CorruptLog(record["seq"],
                                     f"expected seq {expected}")
                events.append(record)
                expected += 1
        return events

    def read_recovered(self) -> list[dict]:
        """Committed events up to the last operation boundary."""
        events = self.read()
        last_boundary = -1
        for i, event in enumerate(events):
            if event.get("boundary"):
                last_boundary = i
        return events[: last_boundary + 1]
