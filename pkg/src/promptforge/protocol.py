"""The constrained function-call language spoken by the chat model.

The model may only answer with calls drawn from a closed set of seven
functions. This module parses raw model responses into calls, renders calls
back to canonical source, and produces repair messages for malformed
responses.

Grammar::

    call   := name "(" [arg {"," arg}] ")"
    arg    := int | string
    int    := digit {digit}
    string := '"' {char | escape} '"'
    escape := "\\" ('"' | "\\" | "n")

Whitespace is permitted around tokens and commas. Prose around calls is
legal and discarded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .templates import TemplateId, render as render_template

Arg = int | str


class ApiFunction(Enum):
    SUBMIT_MESSAGE_TO_USER = "submit_message_to_user"
    SUBMIT_PROMPT = "submit_prompt"
    SWITCH_TO_EXAMPLE = "switch_to_example"
    SHOW_ORIGINAL_TEXT = "show_original_text"
    OUTPUT_ACCEPTED = "output_accepted"
    END_OUTPUTS_DISCUSSION = "end_outputs_discussion"
    CONVERSATION_END = "conversation_end"


# Parameter kinds per function, in positional order.
ARITIES: dict[ApiFunction, tuple[str, ...]] = {
    ApiFunction.SUBMIT_MESSAGE_TO_USER: ("text",),
    ApiFunction.SUBMIT_PROMPT: ("text",),
    ApiFunction.SWITCH_TO_EXAMPLE: ("int",),
    ApiFunction.SHOW_ORIGINAL_TEXT: ("int",),
    ApiFunction.OUTPUT_ACCEPTED: ("int", "text"),
    ApiFunction.END_OUTPUTS_DISCUSSION: (),
    ApiFunction.CONVERSATION_END: (),
}

SIGNATURES: dict[ApiFunction, str] = {
    ApiFunction.SUBMIT_MESSAGE_TO_USER: "submit_message_to_user(msg)",
    ApiFunction.SUBMIT_PROMPT: "submit_prompt(prompt)",
    ApiFunction.SWITCH_TO_EXAMPLE: "switch_to_example(example_num)",
    ApiFunction.SHOW_ORIGINAL_TEXT: "show_original_text(example_num)",
    ApiFunction.OUTPUT_ACCEPTED: "output_accepted(example_num, output)",
    ApiFunction.END_OUTPUTS_DISCUSSION: "end_outputs_discussion()",
    ApiFunction.CONVERSATION_END: "conversation_end()",
}


class DiagnosticKind(Enum):
    NO_CALL_FOUND = "no_call_found"
    UNKNOWN_FUNCTION = "unknown_function"
    ARITY_MISMATCH = "arity_mismatch"
    BAD_LITERAL = "bad_literal"
    UNTERMINATED_STRING = "unterminated_string"


@dataclass(frozen=True)
class ParseDiagnostic:
    kind: DiagnosticKind
    position: int
    detail: str


@dataclass(frozen=True)
class ApiCall:
    function: ApiFunction
    args: tuple[Arg, ...]

    def __post_init__(self):
        kinds = ARITIES[self.function]
        if len(self.args) != len(kinds):
            raise ValueError(
                f"{self.function.value} takes {len(kinds)} argument(s), "
                f"got {len(self.args)}"
            )
        for arg, kind in zip(self.args, kinds):
            if kind == "int" and not isinstance(arg, int):
                raise ValueError(f"{self.function.value}: expected integer argument")
            if kind == "text" and not isinstance(arg, str):
                raise ValueError(f"{self.function.value}: expected string argument")
        # Index range (1..3 when bound to an example) is checked at dispatch.


_FENCE_RE = re.compile(r"```[A-Za-z]*")
_KNOWN_NAME_RE = re.compile(
    r"(?<![A-Za-z0-9_])(" + "|".join(f.value for f in ApiFunction) + r")\s*\("
)
_ANY_CALLISH_RE = re.compile(r"(?<![A-Za-z0-9_])([A-Za-z_][A-Za-z0-9_]*)\s*\(")
_INT_RE = re.compile(r"\d+")
_WS_RE = re.compile(r"\s*")

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n"}


class _CallSyntaxError(Exception):
    def __init__(self, diag: ParseDiagnostic):
        self.diag = diag


_STRING_CHUNK_RE = re.compile(r'[^"\\]*')


def _parse_string(text: str, pos: int) -> tuple[str, int]:
    """Parse a double-quoted string literal starting at ``pos``."""
    assert text[pos] == '"'
    out: list[str] = []
    i = pos + 1
    n = len(text)
    while i < n:
        chunk = _STRING_CHUNK_RE.match(text, i)
        out.append(chunk.group(0))
        i = chunk.end()
        if i >= n:
            break
        c = text[i]
        if c == '"':
            return "".join(out), i + 1
        # c == "\\"
        if i + 1 >= n:
            break
        esc = text[i + 1]
        if esc not in _ESCAPES:
            raise _CallSyntaxError(
                ParseDiagnostic(
                    DiagnosticKind.BAD_LITERAL,
                    i,
                    f"invalid escape sequence '\\{esc}'; only \\\" \\\\ and \\n "
                    "are allowed inside string literals",
                )
            )
        out.append(_ESCAPES[esc])
        i += 2
    raise _CallSyntaxError(
        ParseDiagnostic(
            DiagnosticKind.UNTERMINATED_STRING,
            pos,
            "unterminated string literal; close it with a double quote and escape "
            'double quotes inside parameter values as \\" (newlines as \\n)',
        )
    )


def _parse_args(text: str, pos: int) -> tuple[list[Arg], int]:
    """Parse the argument list after an opening parenthesis at ``pos - 1``."""
    args: list[Arg] = []
    i = _WS_RE.match(text, pos).end()
    n = len(text)
    if i < n and text[i] == ")":
        return args, i + 1
    while True:
        if i >= n:
            raise _CallSyntaxError(
                ParseDiagnostic(
                    DiagnosticKind.BAD_LITERAL, min(i, n), "unexpected end of input "
                    "inside argument list; expected an argument or ')'"
                )
            )
        c = text[i]
        if c == '"':
            value, i = _parse_string(text, i)
            args.append(value)
        else:
            m = _INT_RE.match(text, i)
            if m:
                args.append(int(m.group(0)))
                i = m.end()
            else:
                raise _CallSyntaxError(
                    ParseDiagnostic(
                        DiagnosticKind.BAD_LITERAL,
                        i,
                        f"unexpected token {text[i:i + 10]!r}; arguments must be "
                        "integers or double-quoted string literals",
                    )
                )
        i = _WS_RE.match(text, i).end()
        if i < n and text[i] == ")":
            return args, i + 1
        if i < n and text[i] == ",":
            i = _WS_RE.match(text, i + 1).end()
            continue
        raise _CallSyntaxError(
            ParseDiagnostic(
                DiagnosticKind.BAD_LITERAL,
                min(i, n),
                "expected ',' or ')' after argument",
            )
        )


def _parse_one_call(text: str, match: re.Match) -> tuple[ApiCall, int]:
    function = ApiFunction(match.group(1))
    args, end = _parse_args(text, match.end())
    kinds = ARITIES[function]
    ok = len(args) == len(kinds) and all(
        isinstance(a, int if k == "int" else str) for a, k in zip(args, kinds)
    )
    if not ok:
        got = ", ".join("int" if isinstance(a, int) else "string" for a in args)
        raise _CallSyntaxError(
            ParseDiagnostic(
                DiagnosticKind.ARITY_MISMATCH,
                match.start(),
                f"{function.value} must be called as {SIGNATURES[function]}; "
                f"got {len(args)} argument(s) ({got or 'none'})",
            )
        )
    return ApiCall(function, tuple(args)), end


def parse_model_response(raw: str) -> list[ApiCall] | ParseDiagnostic:
    """Extract API calls from one raw model response, in source order.

    Returns a list of well-formed calls, or a ParseDiagnostic when no call is
    found or the first candidate call is malformed.
    """
    text = _FENCE_RE.sub("", raw)
    calls: list[ApiCall] = []
    pos = 0
    first_candidate = True
    while True:
        match = _KNOWN_NAME_RE.search(text, pos)
        if match is None:
            break
        try:
            call, end = _parse_one_call(text, match)
        except _CallSyntaxError as err:
            if first_candidate and not calls:
                return err.diag
            # Later malformed candidates are treated as prose and skipped.
            pos = match.end()
            first_candidate = False
            continue
        calls.append(call)
        pos = end
        first_candidate = False
    if calls:
        return calls
    callish = _ANY_CALLISH_RE.search(text)
    if callish is not None:
        return ParseDiagnostic(
            DiagnosticKind.UNKNOWN_FUNCTION,
            callish.start(),
            f"'{callish.group(1)}' is not an API function",
        )
    return ParseDiagnostic(
        DiagnosticKind.NO_CALL_FOUND,
        0,
        "the response contained no API call",
    )


def _render_arg(arg: Arg) -> str:
    if isinstance(arg, int):
        return str(arg)
    escaped = arg.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def render_api_call(call: ApiCall) -> str:
    """Emit canonical source for a call."""
    return f"{call.function.value}({', '.join(_render_arg(a) for a in call.args)})"


def repair_message(diag: ParseDiagnostic) -> str:
    """Build the system message sent back to the model after a failed parse."""
    return (
        "Your last response could not be processed: "
        f"{diag.detail} (at offset {diag.position}).\n"
        "The input parameters to API functions should be string literals using "
        "double quotes. Remember to escape double-quote characters inside the "
        "parameter values. "
        "Format ALL your answers python code calling one of the following "
        "functions:\n\n"
        + render_template(TemplateId.API_INSTRUCTION)
        + "\n\nPlease resend your answer as a single API call."
    )
