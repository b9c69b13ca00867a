"""User data ingestion: load an unlabeled data file and split it into the
three chat examples and up to eight evaluation examples.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass

CHAT_EXAMPLE_COUNT = 3
MAX_EVAL_EXAMPLES = 8
MAX_EXAMPLE_CHARS = 8000


class IngestError(Exception):
    pass


class EmptyFile(IngestError):
    pass


class FewerThanThreeExamples(IngestError):
    pass


class MissingTextColumn(IngestError):
    pass


class ExampleTooLong(IngestError):
    pass


class MalformedRow(IngestError):
    def __init__(self, row_number: int, detail: str):
        super().__init__(f"row {row_number}: {detail}")
        self.row_number = row_number


@dataclass(frozen=True)
class UserData:
    chat_examples: tuple[str, str, str]
    eval_examples: tuple[str, ...]
    filename: str = ""
    format: str = ""
    total_rows: int = 0
    selection_seed: int = 0

    def __post_init__(self):
        if len(self.chat_examples) != CHAT_EXAMPLE_COUNT:
            raise IngestError("exactly three chat examples are required")
        if len(self.eval_examples) > MAX_EVAL_EXAMPLES:
            raise IngestError("at most eight evaluation examples are kept")

    def to_record(self) -> dict:
        return {
            "chat_examples": list(self.chat_examples),
            "eval_examples": list(self.eval_examples),
            "filename": self.filename,
            "format": self.format,
            "total_rows": self.total_rows,
            "selection_seed": self.selection_seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UserData":
        return cls(
            chat_examples=tuple(rec["chat_examples"]),
            eval_examples=tuple(rec["eval_examples"]),
            filename=rec.get("filename", ""),
            format=rec.get("format", ""),
            total_rows=rec.get("total_rows", 0),
            selection_seed=rec.get("selection_seed", 0),
        )


def _rows_from_csv(text: str) -> list[tuple[str, str | None]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise EmptyFile("the file contains no rows")
    if "text" not in reader.fieldnames:
        raise MissingTextColumn("CSV input requires a 'text' column")
    has_split = "split" in reader.fieldnames
    rows = []
    for i, rec in enumerate(reader, start=2):  # header is line 1
        value = rec.get("text")
        if value is None:
            raise MalformedRow(i, "missing 'text' value")
        rows.append((value, rec.get("split") if has_split else None))
    return rows


def _rows_from_jsonl(text: str) -> list[tuple[str, str | None]]:
    rows = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRow(i, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(rec, dict):
            raise MalformedRow(i, "each line must be a JSON object")
        if "text" not in rec:
            raise MissingTextColumn(f"row {i}: missing required field 'text'")
        if not isinstance(rec["text"], str):
            raise MalformedRow(i, "'text' must be a string")
        rows.append((rec["text"], rec.get("split")))
    return rows


def infer_format(filename: str) -> str:
    lower = filename.lower()
    if lower.endswith(".csv"):
        return "csv"
    if lower.endswith((".jsonl", ".ndjson", ".json")):
        return "jsonl"
    raise IngestError(f"cannot infer format from filename {filename!r}")


def load_user_data(
    data: bytes,
    fmt: str | None = None,
    seed: int = 0,
    filename: str = "",
) -> UserData:
    """Load and split a CSV or JSONL user data file.

    Rows may carry an explicit ``split`` value ("chat"/"eval"); otherwise the
    split is a seeded shuffle: first three rows become chat examples, the next
    up to eight become evaluation examples.
    """
    if fmt is None:
        fmt = infer_format(filename)
    if fmt not in ("csv", "jsonl"):
        raise IngestError(f"unsupported format {fmt!r}")
    text = data.decode("utf-8")
    if not text.strip():
        raise EmptyFile("the file is empty")
    raw = _rows_from_csv(text) if fmt == "csv" else _rows_from_jsonl(text)

    rows: list[tuple[str, str | None]] = []
    for i, (value, split) in enumerate(raw, start=1):
        value = value.rstrip("\r\n")
        if not value.strip():
            continue
        if len(value) > MAX_EXAMPLE_CHARS:
            raise ExampleTooLong(
                f"row {i} has {len(value)} characters; the per-example cap is "
                f"{MAX_EXAMPLE_CHARS}"
            )
        if split is not None and split not in ("chat", "eval", ""):
            raise MalformedRow(i, f"invalid split value {split!r}")
        rows.append((value, split or None))

    if not rows:
        raise EmptyFile("the file contains no usable rows")

    if any(split is not None for _, split in rows):
        chat = [t for t, s in rows if s == "chat"]
        evals = [t for t, s in rows if s == "eval"]
        if len(chat) < CHAT_EXAMPLE_COUNT:
            raise FewerThanThreeExamples(
                f"found {len(chat)} chat rows; at least three are required"
            )
        chat = chat[:CHAT_EXAMPLE_COUNT]
        evals = evals[:MAX_EVAL_EXAMPLES]
    else:
        if len(rows) < CHAT_EXAMPLE_COUNT:
            raise FewerThanThreeExamples(
                f"found {len(rows)} usable rows; at least three are required"
            )
        order = list(range(len(rows)))
        random.Random(seed).shuffle(order)
        chat = [rows[i][0] for i in order[:CHAT_EXAMPLE_COUNT]]
        evals = [
            rows[i][0]
            for i in order[CHAT_EXAMPLE_COUNT:CHAT_EXAMPLE_COUNT + MAX_EVAL_EXAMPLES]
        ]

    return UserData(
        chat_examples=tuple(chat),
        eval_examples=tuple(evals),
        filename=filename,
        format=fmt,
        total_rows=len(raw),
        selection_seed=seed,
    )


def example_preview(data: UserData, n_chars: int) -> list[str]:
    """Chat examples truncated to ``n_chars`` with an ellipsis marker."""
    if n_chars <= 0:
        raise IngestError("n_chars must be positive")
    return [
        t if len(t) <= n_chars else t[:n_chars] + "…"
        for t in data.chat_examples
    ]
