"""Append-only multi-channel transcript with per-message context filtering.

The main channel holds the user-facing conversation; side channels hold
isolated contexts (prompt execution, feedback analysis). Context construction
filters the main channel by example tag so that discussing one example never
leaks messages exchanged about another.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

MAX_CONTEXT_MESSAGES = 200


class ChatStoreError(Exception):
    pass


class UnknownSideChat(ChatStoreError):
    pass


class ContextTooLarge(ChatStoreError):
    pass


class Author(Enum):
    USER = "user"
    SYSTEM = "system"
    MODEL = "model"
    TARGET_MODEL = "target_model"


@dataclass(frozen=True)
class Message:
    id: int
    author: Author
    content: str
    stage: str = ""
    example: int | None = None
    side_id: int | None = None  # None means the main channel

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "author": self.author.value,
            "content": self.content,
            "tags": {
                "stage": self.stage,
                "example": self.example,
                "channel": "main" if self.side_id is None else self.side_id,
            },
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Message":
        channel = rec["tags"]["channel"]
        return cls(
            id=rec["id"],
            author=Author(rec["author"]),
            content=rec["content"],
            stage=rec["tags"].get("stage", ""),
            example=rec["tags"].get("example"),
            side_id=None if channel == "main" else int(channel),
        )


@dataclass(frozen=True)
class ContextSpec:
    side_id: int | None = None
    focus_example: int | None = None


class Transcript:
    """Append-only message store.

    ``on_append`` (if set) is invoked with every appended Message; the
    orchestrator uses it to mirror appends into the session event log.
    """

    def __init__(self, on_append: Callable[[Message], None] | None = None):
        self.messages: list[Message] = []
        self.next_side_id = 1
        self.on_append = on_append

    @property
    def last_id(self) -> int:
        return self.messages[-1].id if self.messages else 0

    def append(
        self,
        author: Author,
        content: str,
        stage: str = "",
        example: int | None = None,
        side_id: int | None = None,
    ) -> Message:
        if example is not None and not 1 <= example <= 3:
            raise ChatStoreError(f"example tag out of range: {example}")
        if author is Author.TARGET_MODEL and side_id is None:
            raise ChatStoreError("target_model messages are confined to side chats")
        if side_id is not None and side_id >= self.next_side_id:
            raise UnknownSideChat(f"side chat {side_id} was never opened")
        msg = Message(self.last_id + 1, author, content, stage, example, side_id)
        self.messages.append(msg)
        if self.on_append is not None:
            self.on_append(msg)
        return msg

    def append_raw(self, msg: Message) -> Message:
        """Append a fully-formed message (replay path); id must be the next id."""
        if msg.id != self.last_id + 1:
            raise ChatStoreError(f"non-consecutive message id {msg.id}")
        self.messages.append(msg)
        if msg.side_id is not None and msg.side_id >= self.next_side_id:
            self.next_side_id = msg.side_id + 1
        return msg

    def allocate_side_id(self) -> int:
        side_id = self.next_side_id
        self.next_side_id += 1
        return side_id

    def open_side_chat(
        self, seeds: list[tuple[Author, str]], stage: str = ""
    ) -> int:
        """Open a fresh side chat seeded with copies of the given messages."""
        side_id = self.allocate_side_id()
        for author, content in seeds:
            self.append(author, content, stage=stage, side_id=side_id)
        return side_id

    def build_context(
        self, side_id: int | None = None, focus_example: int | None = None
    ) -> list[Message]:
        """Select the messages visible for one model request, in id order."""
        if side_id is not None:
            if side_id >= self.next_side_id or side_id < 1:
                raise UnknownSideChat(f"side chat {side_id} was never opened")
            selected = [m for m in self.messages if m.side_id == side_id]
        else:
            selected = [
                m
                for m in self.messages
                if m.side_id is None
                and (focus_example is None or m.example in (None, focus_example))
            ]
        if len(selected) > MAX_CONTEXT_MESSAGES:
            raise ContextTooLarge(
                f"context of {len(selected)} messages exceeds the "
                f"{MAX_CONTEXT_MESSAGES}-message cap"
            )
        return selected

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(m.to_record(), ensure_ascii=False) + "\n"
            for m in self.messages
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls()
        for line in text.splitlines():
            if line.strip():
                t.append_raw(Message.from_record(json.loads(line)))
        return t
