"""System-instruction templates and their rendering.

Each template is stored verbatim with ``{{name}}`` placeholders and can be
overridden by dropping a same-named ``.txt`` file into a template directory.
"""

from __future__ import annotations

import re
from enum import Enum
from pathlib import Path


class TemplateError(Exception):
    pass


class MissingPlaceholder(TemplateError):
    pass


class UnknownPlaceholder(TemplateError):
    pass


class TemplateId(Enum):
    INITIALIZATION = "initialization"
    API_INSTRUCTION = "api_instruction"
    USER_DATA_INTRO = "user_data_intro"
    USER_DATA_ANALYSIS = "user_data_analysis"
    OUTPUTS_INTRO = "outputs_intro"
    OUTPUTS_ANALYSIS = "outputs_analysis"
    EXAMPLE_SWITCH = "example_switch"
    OUTPUTS_COT_START = "outputs_cot_start"
    OUTPUTS_COT_END = "outputs_cot_end"
    OUTPUTS_DISCUSSION = "outputs_discussion"
    CONVERSATION_END = "conversation_end"
    BASELINE_PROMPT = "baseline_prompt"
    BASELINE_META_PROMPT = "baseline_meta_prompt"


_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

DEFAULT_BODIES: dict[TemplateId, str] = {
    TemplateId.INITIALIZATION: (
        "You and I (system) will work together to build a prompt for the task of the "
        "user via a chat with the user. This prompt will be fed to a model dedicated "
        "to perform the user's task. Our aim is to build a prompt that when fed to "
        "the model, produce outputs that are aligned with the user's expectations. "
        "Thus, the prompt should reflect the specific requirements and preferences of "
        "the user from the output as expressed in the chat. You will interact with "
        "the user to gather information regarding their preferences and needs. I "
        "will send the prompts you suggest to the dedicated model to generate "
        "outputs, and pass them back to you, so that you could discuss them with the "
        "user and get feedback. User time is valuable, keep the conversation "
        "pragmatic. Make the obvious decisions by your Don't greet the user at your "
        "first interaction.You should communicate with the user and system ONLY via "
        "python API described below, and not via direct messages. The input "
        "parameters to API functions should be string literals using double quotes. "
        "Remember to escape double-quote characters inside the parameter values. "
        "Note that the user is not aware of the API, so don't not tell the user "
        "which API you are going to call. Format ALL your answers python code "
        "calling one of the following functions:"
    ),
    TemplateId.API_INSTRUCTION: (
        "function submit_message_to_user(msg): call this function to submit your "
        "message to the user. Use markdown to mark the prompts and the outputs.\n\n"
        "function submit_prompt(prompt): call this function to inform the system "
        "that you have a new suggestion for the prompt. Use it only with the prompts "
        "approved by the user.\n\n"
        "function switch_to_example(example_num): call this function before you "
        "start discussing with the user an output of a specific example, and pass "
        "the example number as parameter.\n\n"
        "function show_original_text(example_num): call this function when the user "
        "asks to show the original text of an example, and pass the example number "
        "as parameter.\n\n"
        "function output_accepted(example_num, output): call this function every "
        "time the user unequivocally accepts an output. Pass the example number and "
        "the output text as parameters.\n\n"
        "function end_outputs_discussion(): call this function after all the outputs "
        "have been discussed with the user and all 3 outputs were accepted by the "
        "user.\n\n"
        "function conversation_end(): call this function when the user wants to end "
        "the conversation."
    ),
    TemplateId.USER_DATA_INTRO: (
        "The user has provided some text examples. I've selected a few of them that "
        "you will use in the conversation. Note that your goal to build a generic "
        "prompt, and not for these specific examples.\n\n{{examples}}"
    ),
    TemplateId.USER_DATA_ANALYSIS: (
        "Before suggesting the prompt, briefly discuss the text examples with the "
        "user and ask them relevant questions regarding their output requirements "
        "and preferences. Please take into account the specific characteristics of "
        "the data. Your suggested prompt should reflect the user's expectations from "
        "the task output as expressed during the chat. Share the suggested prompt "
        "with the user before submitting it. Remember to communicate only via API "
        "calls."
    ),
    TemplateId.OUTPUTS_INTRO: (
        "Based on the suggested prompt, the model has produced the following outputs "
        "for the user input examples:\n\n{{outputs}}"
    ),
    TemplateId.OUTPUTS_ANALYSIS: (
        "For each of 3 examples show the model output to the user and discuss it "
        "with them, one example at a time. Use switch_example API to navigate "
        "between examples. The discussion should take as long as necessary and "
        "result in an output accepted by the user in clear way, with no doubts, "
        "conditions or modifications. When the output is accepted, call "
        "output_accepted API passing the example number and the output text. After "
        "calling output_accepted call either switch_to_example API to move to the "
        "next example, or end_outputs_discussion API if all 3 have been accepted. "
        "Assume that the user comments relay to the output. Only when the user "
        "explicitly says that he wants to update the prompt and not the output, show "
        "the updated prompt to them. Remember to communicate only via API calls."
    ),
    TemplateId.EXAMPLE_SWITCH: (
        "You have switched to {{example_num}}. Look at the user comments and the "
        "accepted outputs for the previous examples, apply them to the model output "
        "of this example, and present the result to the user. Indicate the example "
        "(number), and format the text so that the output and your text are "
        "separated by empty lines. Discuss the presented output taking into account "
        "the system conclusion for this example if exists."
    ),
    TemplateId.OUTPUTS_COT_START: (
        "In the following discussion, the user was asked to give feedback on the "
        "model's outputs that were generated by the prompt \"{{prompt}}\". The "
        "outputs that did not meet the user's requirements were modified."
    ),
    TemplateId.OUTPUTS_COT_END: (
        "Analyze the conversation above, and share the comments made by the user on "
        "Examples 1-3. Any comment should be shared, even if minor. If no comment "
        "has been made, accept the prompt. If any comment has been made, recommend "
        "how to improve the prompt so it would produce the accepted outputs "
        "directly."
    ),
    TemplateId.OUTPUTS_DISCUSSION: (
        "{{recommendations}}\n\n"
        "Continue your conversation with the user. Do the recommendations above "
        "suggest improvements to the prompt? If so, present the modified prompt to "
        "the user, and submit it only after the user approve it. Otherwise, if no "
        "modifications to the prompt are required, communicate it to user and "
        "suggest to finish the conversation."
    ),
    TemplateId.CONVERSATION_END: (
        "This is the end of conversation. Say goodbye to the user, and inform that "
        "the final prompt that includes few-shot examples and is formatted for the "
        "{{model}} can be downloaded via **Download few shot prompt** button below. "
        "Also, kindly refer the user to the survey tab that is now available, and "
        "let the user know that we will appreciate any feedback."
    ),
    TemplateId.BASELINE_PROMPT: (
        "Summarize the main points and key information from the provided text in a "
        "concise and clear manner, preserving the original meaning and content."
    ),
    TemplateId.BASELINE_META_PROMPT: (
        "Generate a concise and general prompt for a summarization task in one "
        "sentence"
    ),
}


class TemplateLibrary:
    """Immutable-after-load mapping from TemplateId to body text."""

    def __init__(self, override_dir: str | Path | None = None):
        self._bodies = dict(DEFAULT_BODIES)
        if override_dir is not None:
            root = Path(override_dir)
            for tid in TemplateId:
                path = root / f"{tid.value}.txt"
                if path.is_file():
                    self._bodies[tid] = path.read_text(encoding="utf-8")

    def body(self, tid: TemplateId) -> str:
        return self._bodies[tid]

    def placeholder_set(self, tid: TemplateId) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self._bodies[tid]))

    def render(self, tid: TemplateId, binding: dict[str, str] | None = None) -> str:
        binding = binding or {}
        required = self.placeholder_set(tid)
        missing = required - set(binding)
        if missing:
            raise MissingPlaceholder(
                f"{tid.value}: missing placeholder(s) {sorted(missing)}"
            )
        extra = set(binding) - required
        if extra:
            raise UnknownPlaceholder(
                f"{tid.value}: unknown placeholder(s) {sorted(extra)}"
            )
        return _PLACEHOLDER_RE.sub(lambda m: binding[m.group(1)], self._bodies[tid])


_DEFAULT_LIBRARY = TemplateLibrary()


def placeholder_set(tid: TemplateId) -> set[str]:
    return _DEFAULT_LIBRARY.placeholder_set(tid)


def render(tid: TemplateId, binding: dict[str, str] | None = None) -> str:
    """Render a template from the default library."""
    return _DEFAULT_LIBRARY.render(tid, binding)
