"""Command-line entry point: serve the HTTP API, or run a terminal chat
session with the terminal acting as the user.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from ..backends import BackendConfig, BackendError, config_from_dict
from ..ingest import infer_format, load_user_data
from ..orchestrator import (
    StageKind,
    finalize,
    post_user_message,
    start_session,
)
from ..promptkit import TARGET_TEMPLATES
from ..templates import TemplateLibrary


def _backend_from_flag(value: str, args, prefix: str) -> BackendConfig:
    if value.startswith("scripted:"):
        path = value.split(":", 1)[1]
        responses = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(responses, list):
            raise SystemExit(f"{path}: expected a JSON list of responses")
        return config_from_dict({"kind": "scripted", "responses": responses})
    if value == "remote":
        endpoint = getattr(args, f"{prefix}_endpoint")
        model = getattr(args, f"{prefix}_model")
        if not endpoint or not model:
            raise SystemExit(
                f"remote {prefix} backend requires --{prefix}-endpoint and "
                f"--{prefix}-model"
            )
        return config_from_dict({
            "kind": "remote",
            "endpoint": endpoint,
            "model_id": model,
            "auth_env_name": getattr(args, f"{prefix}_auth_env"),
        })
    raise SystemExit(f"unknown backend spec {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptforge",
        description="Build a task prompt through a guided chat over your data.",
    )
    parser.add_argument("--data", help="path to the unlabeled data file")
    parser.add_argument("--format", choices=["csv", "jsonl"])
    parser.add_argument("--chat-backend", default=None,
                        help="scripted:<file> or remote")
    parser.add_argument("--target-backend", default=None,
                        help="scripted:<file> or remote")
    parser.add_argument("--chat-endpoint")
    parser.add_argument("--chat-model")
    parser.add_argument("--chat-auth-env")
    parser.add_argument("--target-endpoint")
    parser.add_argument("--target-model")
    parser.add_argument("--target-auth-env")
    parser.add_argument("--template", default="generic",
                        choices=sorted(TARGET_TEMPLATES))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--template-dir",
                        help="directory of template override files")
    parser.add_argument("--serve", metavar="ADDR",
                        help="serve the HTTP API on host:port")
    parser.add_argument("--data-dir",
                        help="session persistence directory (serve mode)")
    parser.add_argument("--out", help="write the final FS prompt here")
    return parser


def _serve(args) -> int:
    import uvicorn

    from .app import create_app
    from .manager import SessionManager

    host, _, port = args.serve.rpartition(":")
    data_dir = args.data_dir or tempfile.mkdtemp(prefix="promptforge-")
    library = TemplateLibrary(args.template_dir)
    app = create_app(SessionManager(data_dir, library))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def _terminal_chat(args) -> int:
    if not args.data or not args.chat_backend or not args.target_backend:
        raise SystemExit("terminal mode requires --data, --chat-backend and "
                         "--target-backend")
    raw = Path(args.data).read_bytes()
    fmt = args.format or infer_format(args.data)
    data = load_user_data(raw, fmt, args.seed, filename=args.data)
    chat_cfg = _backend_from_flag(args.chat_backend, args, "chat")
    target_cfg = _backend_from_flag(args.target_backend, args, "target")
    library = TemplateLibrary(args.template_dir)

    try:
        session = start_session(
            data, chat_cfg, target_cfg, TARGET_TEMPLATES[args.template],
            library=library,
        )
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 1

    def show(entries):
        for entry in entries:
            print(f"[{entry['role']}] {entry['text']}\n")

    show(session.visible_log)
    while session.stage.kind is not StageKind.ENDED:
        try:
            text = input("you> ")
        except EOFError:
            print()
            break
        if not text.strip():
            continue
        show(post_user_message(session, text))

    if session.stage.kind is StageKind.ENDED:
        prompts = finalize(session)
        out_path = Path(args.out) if args.out else Path("fs_prompt.txt")
        out_path.write_text(prompts["fs_prompt"] + (
            "" if prompts["fs_prompt"].endswith("\n") else "\n"
        ), encoding="utf-8")
        print(f"final few-shot prompt written to {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.serve:
        return _serve(args)
    return _terminal_chat(args)


if __name__ == "__main__":
    raise SystemExit(main())
