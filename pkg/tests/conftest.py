"""Shared fixtures: canonical scripted sessions and data files."""

from __future__ import annotations

import pytest

from promptforge.backends import scripted
from promptforge.ingest import load_user_data
from promptforge.orchestrator import Session, post_user_message, start_session
from promptforge.promptkit import GENERIC_TEMPLATE


def csv_bytes(rows: list[str], split: list[str] | None = None) -> bytes:
    import csv
    import io

    buf = io.StringIO()
    if split is None:
        writer = csv.writer(buf)
        writer.writerow(["text"])
        for row in rows:
            writer.writerow([row])
    else:
        writer = csv.writer(buf)
        writer.writerow(["text", "split"])
        for row, s in zip(rows, split):
            writer.writerow([row, s])
    return buf.getvalue().encode("utf-8")


def jsonl_bytes(rows: list[str]) -> bytes:
    import json

    return "".join(json.dumps({"text": r}) + "\n" for r in rows).encode("utf-8")


def make_user_data(n_rows: int = 3, seed: int = 0):
    rows = [f"document {i}: some text about topic {i}" for i in range(1, n_rows + 1)]
    return load_user_data(csv_bytes(rows), "csv", seed=seed, filename="data.csv")


def one_iteration_chat_script(
    prompt_text: str = "Summarize the key facts briefly.",
    outputs: tuple[str, str, str] = ("out-1", "out-2", "out-3"),
    recommendations: str = "No comments were made. The prompt needs no change.",
) -> list[str]:
    """Chat-model responses for a session that converges in one iteration."""
    return [
        'submit_message_to_user("What should the summaries focus on?")',
        'submit_message_to_user("How about this prompt: '
        '**Summarize the key facts briefly.** Shall I submit it?")',
        f'submit_prompt("{prompt_text}")',
        "switch_to_example(1)",
        f'submit_message_to_user("Example 1 output: {outputs[0]}. Accept?")',
        f'output_accepted(1, "{outputs[0]}")',
        f'submit_message_to_user("Example 2 output: {outputs[1]}. Accept?")',
        f'output_accepted(2, "{outputs[1]}")',
        f'submit_message_to_user("Example 3 output: {outputs[2]}. Accept?")',
        f'output_accepted(3, "{outputs[2]}")',
        recommendations,  # free-text feedback-analysis side chat
        'submit_message_to_user("The outputs needed no changes. '
        'Shall we finish?")',
        "conversation_end()",
    ]


ONE_ITERATION_USER_TURNS = [
    "Focus on the key facts.",
    "Approved, submit it.",
    "Accept it.",
    "accept",
    "accept",
    "yes, end it",
]


def two_iteration_chat_script() -> list[str]:
    first = one_iteration_chat_script(
        recommendations="The user asked for bullet points. "
        "Recommend adding bullet points to the prompt.",
    )[:-2]  # stop before the closing exchange of iteration one
    second = [
        'submit_message_to_user("I recommend adding bullet points. '
        'Updated prompt: **Summarize the key facts briefly in bullet '
        'points.** OK?")',
        'submit_prompt("Summarize the key facts briefly in bullet points.")',
        "switch_to_example(1)",
        'submit_message_to_user("Example 1 output: bullet-out-1. Accept?")',
        'output_accepted(1, "bullet-out-1")',
        'submit_message_to_user("Example 2 output: bullet-out-2. Accept?")',
        'output_accepted(2, "bullet-out-2")',
        'submit_message_to_user("Example 3 output: bullet-out-3. Accept?")',
        'output_accepted(3, "bullet-out-3")',
        "No further comments were made; the prompt needs no change.",
        'submit_message_to_user("All outputs accepted. Shall we finish?")',
        "conversation_end()",
    ]
    return first + second


TWO_ITERATION_USER_TURNS = [
    "Focus on the key facts.",
    "Approved, submit it.",
    "Accept it.",
    "accept",
    "accept, but please use bullet points next time",
    "Yes, submit the new prompt.",
    "accept",
    "accept",
    "accept",
    "yes, end it",
]

TWO_ITERATION_TARGET_SCRIPT = [
    "out-1", "out-2", "out-3",
    "bullet-out-1", "bullet-out-2", "bullet-out-3",
]


def run_scripted_session(
    chat_script: list[str],
    target_script: list[str],
    user_turns: list[str],
    data=None,
    recorder=None,
) -> Session:
    session = start_session(
        data or make_user_data(),
        scripted(chat_script),
        scripted(target_script, model_id="target-model"),
        GENERIC_TEMPLATE,
        recorder=recorder,
    )
    for turn in user_turns:
        post_user_message(session, turn)
    return session


@pytest.fixture
def completed_session() -> Session:
    return run_scripted_session(
        one_iteration_chat_script(),
        ["out-1", "out-2", "out-3"],
        ONE_ITERATION_USER_TURNS,
    )


@pytest.fixture
def two_iteration_session() -> Session:
    return run_scripted_session(
        two_iteration_chat_script(),
        TWO_ITERATION_TARGET_SCRIPT,
        TWO_ITERATION_USER_TURNS,
    )
