"""Zero-shot and few-shot prompt assembly in a target model template."""

from __future__ import annotations

from dataclasses import dataclass

INPUT_PLACEHOLDER = "{{input}}"


class PromptKitError(Exception):
    pass


@dataclass(frozen=True)
class Instruction:
    text: str
    version: int
    created_turn: int = 0

    def __post_init__(self):
        if not self.text:
            raise PromptKitError("instruction text must be non-empty")
        if self.version < 1:
            raise PromptKitError("instruction versions start at 1")


@dataclass(frozen=True)
class AcceptedExample:
    example_num: int
    input_text: str
    output_text: str
    accepted_turn: int = 0

    def __post_init__(self):
        if not 1 <= self.example_num <= 3:
            raise PromptKitError(f"example_num out of range: {self.example_num}")


@dataclass(frozen=True)
class TargetTemplate:
    """Literal text fragments concatenated around payload texts.

    No payload escaping is performed; payloads are trusted session data.
    """

    name: str
    preamble: str = ""
    system_open: str = "[SYSTEM]\n"
    system_close: str = "\n"
    user_open: str = "[USER]\n"
    user_close: str = "\n"
    assistant_open: str = "[ASSISTANT]\n"
    assistant_close: str = "\n"
    generation_cue: str = ""


GENERIC_TEMPLATE = TargetTemplate(name="generic")

LLAMA3_TEMPLATE = TargetTemplate(
    name="llama3",
    preamble="<|begin_of_text|>",
    system_open="<|start_header_id|>system<|end_header_id|>\n\n",
    system_close="<|eot_id|>",
    user_open="<|start_header_id|>user<|end_header_id|>\n\n",
    user_close="<|eot_id|>",
    assistant_open="<|start_header_id|>assistant<|end_header_id|>\n\n",
    assistant_close="<|eot_id|>",
    generation_cue="",
)

TARGET_TEMPLATES: dict[str, TargetTemplate] = {
    t.name: t for t in (GENERIC_TEMPLATE, LLAMA3_TEMPLATE)
}


@dataclass(frozen=True)
class PromptBundle:
    instruction: Instruction
    examples: tuple[AcceptedExample, ...] = ()
    template: TargetTemplate = GENERIC_TEMPLATE

    def __post_init__(self):
        nums = [e.example_num for e in self.examples]
        if len(set(nums)) != len(nums):
            raise PromptKitError("duplicate example_num in bundle")


def build_zs_prompt(bundle: PromptBundle, input_text: str = INPUT_PLACEHOLDER) -> str:
    """Render the instruction-only prompt for one input (or the placeholder)."""
    t = bundle.template
    return (
        t.preamble
        + t.system_open + bundle.instruction.text + t.system_close
        + t.user_open + input_text + t.user_close
        + t.assistant_open + t.generation_cue
    )


def build_fs_prompt(bundle: PromptBundle, input_text: str = INPUT_PLACEHOLDER) -> str:
    """Render the prompt with accepted examples as alternating chat turns.

    With no accepted examples this equals the zero-shot rendering.
    """
    t = bundle.template
    parts = [t.preamble, t.system_open, bundle.instruction.text, t.system_close]
    for ex in sorted(bundle.examples, key=lambda e: e.example_num):
        parts += [t.user_open, ex.input_text, t.user_close,
                  t.assistant_open, ex.output_text, t.assistant_close]
    parts += [t.user_open, input_text, t.user_close,
              t.assistant_open, t.generation_cue]
    return "".join(parts)


def register_accepted(
    examples: list[AcceptedExample],
    example_num: int,
    input_text: str,
    output_text: str,
    accepted_turn: int = 0,
) -> list[AcceptedExample]:
    """Insert or replace the accepted output for one example number."""
    if not 1 <= example_num <= 3:
        raise PromptKitError(f"example_num out of range: {example_num}")
    entry = AcceptedExample(example_num, input_text, output_text, accepted_turn)
    kept = [e for e in examples if e.example_num != example_num]
    kept.append(entry)
    kept.sort(key=lambda e: e.example_num)
    return kept


def approx_token_count(text: str) -> int:
    # Display-only heuristic; per-provider tokenization is out of scope.
    return max(1, len(text) // 4)
