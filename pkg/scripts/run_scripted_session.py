#!/usr/bin/env python3
"""Run a fully scripted refinement session end to end and print the result.

Both the chat model and the target model are replaced by scripted response
queues, so the demo is deterministic and needs no network access. It walks
the complete workflow — data analysis, instruction proposal, per-example
output discussion, feedback analysis, refinement — and prints the visible
transcript plus the final zero-shot and few-shot prompts.

Usage: python3 scripts/run_scripted_session.py
"""

from promptforge import (
    GENERIC_TEMPLATE,
    finalize,
    load_user_data,
    post_user_message,
    scripted,
    start_session,
)

DOCUMENTS = [
    "The city council voted 7-2 to expand the bike lane network downtown, "
    "citing a 40% rise in cycling commuters since 2023.",
    "Researchers at the marine institute reported that kelp forests off the "
    "northern coast regrew faster than expected after the 2024 heat wave.",
    "The regional rail operator announced night service on weekends starting "
    "next spring, funded by a new transit levy.",
]

CHAT_SCRIPT = [
    'submit_message_to_user("I see three short news reports. Should the '
    'summaries keep concrete numbers and dates, or stay high-level?")',
    'submit_message_to_user("Got it. Proposed prompt: **Summarize the news '
    'report in one sentence, keeping key figures.** Submit it?")',
    'submit_prompt("Summarize the news report in one sentence, keeping key '
    'figures.")',
    "switch_to_example(1)",
    'submit_message_to_user("Example 1 output: **City council approves '
    'downtown bike lane expansion 7-2 amid 40% commuter growth.** '
    'Accept?")',
    'output_accepted(1, "City council approves downtown bike lane expansion '
    '7-2 amid 40% commuter growth.")',
    'submit_message_to_user("Example 2 output: **Northern kelp forests '
    'rebounded quickly after the 2024 heat wave.** Accept?")',
    'output_accepted(2, "Northern kelp forests rebounded quickly after the '
    '2024 heat wave.")',
    'submit_message_to_user("Example 3 output: **Weekend night rail service '
    'arrives next spring under a new transit levy.** Accept?")',
    'output_accepted(3, "Weekend night rail service arrives next spring '
    'under a new transit levy.")',
    "No comments were made. The prompt needs no change.",
    'submit_message_to_user("All outputs were accepted as generated, so the '
    'prompt needs no changes. Shall we finish?")',
    "conversation_end()",
]

TARGET_SCRIPT = [
    "City council approves downtown bike lane expansion 7-2 amid 40% "
    "commuter growth.",
    "Northern kelp forests rebounded quickly after the 2024 heat wave.",
    "Weekend night rail service arrives next spring under a new transit "
    "levy.",
]

USER_TURNS = [
    "Keep the concrete numbers, one sentence each.",
    "Yes, submit it.",
    "Accepted.",
    "Accepted.",
    "Accepted.",
    "Yes, we are done.",
]


def main() -> int:
    import json

    # an explicit split column keeps the examples in file order
    payload = "".join(
        json.dumps({"text": doc, "split": "chat"}) + "\n" for doc in DOCUMENTS
    ).encode()
    data = load_user_data(payload, "jsonl", seed=0, filename="demo.jsonl")

    session = start_session(
        data,
        scripted(CHAT_SCRIPT),
        scripted(TARGET_SCRIPT, model_id="demo-target"),
        GENERIC_TEMPLATE,
    )

    def show(entries):
        for entry in entries:
            print(f"[{entry['role']}] {entry['text']}\n")

    show(session.visible_log)
    for turn in USER_TURNS:
        print(f"[user] {turn}\n")
        shown = post_user_message(session, turn)
        show([e for e in shown if e["role"] != "user"])

    prompts = finalize(session)
    print("=" * 72)
    print("ZERO-SHOT PROMPT\n" + "-" * 72)
    print(prompts["zs_prompt"])
    print("=" * 72)
    print("FEW-SHOT PROMPT\n" + "-" * 72)
    print(prompts["fs_prompt"])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
