"""The system actor: a six-stage workflow state machine that injects system
instructions dynamically, dispatches the model's API calls, and runs the
feedback-analysis side chat.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .backends import BackendConfig, BackendError, ChatRequest, complete
from .chatstore import Author, Message, Transcript
from .ingest import UserData
from .promptkit import (
    AcceptedExample,
    Instruction,
    PromptBundle,
    TargetTemplate,
    GENERIC_TEMPLATE,
    build_fs_prompt,
    build_zs_prompt,
    register_accepted,
)
from .protocol import (
    ApiCall,
    ApiFunction,
    ParseDiagnostic,
    SIGNATURES,
    parse_model_response,
    render_api_call,
    repair_message,
)
from .templates import TemplateId, TemplateLibrary

MAX_MODEL_CALLS_PER_TURN = 25
MAX_STAGE_VIOLATIONS_PER_TURN = 2
ERROR_NOTICE_PREFIX = "The session hit a problem: "

_ROLE_BY_AUTHOR = {
    Author.USER: "user",
    Author.SYSTEM: "system",
    Author.MODEL: "assistant",
    Author.TARGET_MODEL: "assistant",
}


class OrchestratorError(Exception):
    pass


class StageViolation(OrchestratorError):
    pass


class IndexOutOfRange(OrchestratorError):
    pass


class NotEnded(OrchestratorError):
    pass


class ModelLoopExceeded(OrchestratorError):
    pass


class ProtocolFailure(OrchestratorError):
    def __init__(self, diag: ParseDiagnostic):
        super().__init__(f"model response unparseable after repair: {diag.detail}")
        self.diag = diag


class StageKind(Enum):
    SETUP = "setup"
    INITIAL_DISCUSSION = "initial_discussion"
    OUTPUT_GENERATION = "output_generation"
    OUTPUT_DISCUSSION = "output_discussion"
    FEEDBACK_ANALYSIS = "feedback_analysis"
    REFINEMENT = "refinement"
    ENDED = "ended"


@dataclass(frozen=True)
class Stage:
    kind: StageKind
    current_example: int | None = None

    def label(self) -> str:
        if self.current_example is not None:
            return f"{self.kind.value}:{self.current_example}"
        return self.kind.value

    @classmethod
    def from_label(cls, label: str) -> "Stage":
        if ":" in label:
            kind, num = label.split(":", 1)
            return cls(StageKind(kind), int(num))
        return cls(StageKind(label))


class Session:
    """One conversation: transcript, workflow stage, and derived prompt state.

    Strictly sequential; the service layer serializes access per session.
    """

    def __init__(
        self,
        chat_backend: BackendConfig,
        target_backend: BackendConfig,
        target_template: TargetTemplate = GENERIC_TEMPLATE,
        session_id: str | None = None,
        library: TemplateLibrary | None = None,
        recorder: Callable[[dict], None] | None = None,
    ):
        self.id = session_id or uuid.uuid4().hex
        self.chat_backend = chat_backend
        self.target_backend = target_backend
        self.target_template = target_template
        self.library = library or TemplateLibrary()
        self.stage = Stage(StageKind.SETUP)
        self.stage_history: list[str] = [self.stage.label()]
        self.transcript = Transcript(on_append=self._on_append)
        self.data: UserData | None = None
        self.instruction_history: list[Instruction] = []
        self.accepted: list[AcceptedExample] = []
        self.accepted_history: list[AcceptedExample] = []
        self.prompt_outputs: dict[int, str] = {}
        self.iteration = 0
        self.iteration_marker = 0
        self.chat_calls = 0
        self.target_calls = 0
        self.visible_log: list[dict] = []
        self.errors: list[str] = []
        self.survey: tuple[int, int, int, int] | None = None
        self.eval_items: list = []
        self.event_log: list[dict] = []
        self.recorder = recorder
        self._stage_accum: list[list[str]] = []

    # -- events and transcript plumbing ---------------------------------

    def record(self, kind: str, payload: dict) -> None:
        event = {
            "kind": kind,
            "payload": payload,
            "chat_calls": self.chat_calls,
            "target_calls": self.target_calls,
        }
        self.event_log.append(event)
        if self.recorder is not None:
            self.recorder(event)

    def _on_append(self, msg: Message) -> None:
        self.record("MessageAppended", msg.to_record())
        self.register_visible(msg)

    def register_visible(self, msg: Message) -> None:
        """Apply the user-visibility rule to a newly appended message."""
        if msg.side_id is not None:
            return
        if msg.author is Author.USER:
            self.visible_log.append({"id": msg.id, "role": "user",
                                     "text": msg.content})
        elif msg.author is Author.MODEL:
            parsed = parse_model_response(msg.content)
            if (
                isinstance(parsed, list)
                and len(parsed) == 1
                and parsed[0].function is ApiFunction.SUBMIT_MESSAGE_TO_USER
            ):
                self.visible_log.append({"id": msg.id, "role": "assistant",
                                         "text": parsed[0].args[0]})
        elif msg.author is Author.SYSTEM and msg.content.startswith(
            ERROR_NOTICE_PREFIX
        ):
            self.visible_log.append({"id": msg.id, "role": "system",
                                     "text": msg.content})

    def append(
        self,
        author: Author,
        content: str,
        example: int | None = None,
        side_id: int | None = None,
    ) -> Message:
        return self.transcript.append(
            author, content, stage=self.stage.label(), example=example,
            side_id=side_id,
        )

    def set_stage(self, stage: Stage) -> None:
        self.stage = stage
        self.stage_history.append(stage.label())
        if self._stage_accum:
            self._stage_accum[-1].append(stage.label())

    # -- backend access --------------------------------------------------

    def _to_request(self, messages: list[Message]) -> ChatRequest:
        return ChatRequest(
            messages=[
                {"role": _ROLE_BY_AUTHOR[m.author], "content": m.content}
                for m in messages
            ]
        )

    def complete_chat(self, context: list[Message]) -> str:
        self.chat_calls += 1
        return complete(self.chat_backend, self._to_request(context)).content

    def complete_target(self, context: list[Message]) -> str:
        self.target_calls += 1
        return complete(self.target_backend, self._to_request(context)).content

    # -- derived prompt state --------------------------------------------

    def current_instruction(self) -> Instruction:
        if not self.instruction_history:
            raise OrchestratorError("no instruction has been submitted yet")
        return self.instruction_history[-1]

    def bundle(self, with_examples: bool = True) -> PromptBundle:
        return PromptBundle(
            instruction=self.current_instruction(),
            examples=tuple(self.accepted) if with_examples else (),
            template=self.target_template,
        )

    def accepted_nums(self) -> set[int]:
        return {e.example_num for e in self.accepted}

    def state_dict(self) -> dict:
        """Replay-comparable snapshot of all persistent session state."""
        return {
            "id": self.id,
            "stage": self.stage.label(),
            "stage_history": list(self.stage_history),
            "messages": [m.to_record() for m in self.transcript.messages],
            "next_side_id": self.transcript.next_side_id,
            "data": self.data.to_record() if self.data else None,
            "instructions": [
                (i.text, i.version, i.created_turn) for i in self.instruction_history
            ],
            "accepted": [
                (e.example_num, e.input_text, e.output_text, e.accepted_turn)
                for e in self.accepted
            ],
            "prompt_outputs": dict(self.prompt_outputs),
            "iteration": self.iteration,
            "iteration_marker": self.iteration_marker,
            "visible": list(self.visible_log),
            "survey": self.survey,
        }


def _numbered_block(texts, title: str) -> str:
    return "\n\n".join(
        f"{title} {i}:\n{text}" for i, text in enumerate(texts, start=1)
    )


def start_session(
    data: UserData,
    chat_backend: BackendConfig,
    target_backend: BackendConfig,
    target_template: TargetTemplate = GENERIC_TEMPLATE,
    session_id: str | None = None,
    library: TemplateLibrary | None = None,
    recorder: Callable[[dict], None] | None = None,
) -> Session:
    """Open a session: inject the setup instructions and let the model open
    the data discussion. Backend errors propagate with the session left in
    the initial-discussion stage.
    """
    session = Session(
        chat_backend, target_backend, target_template,
        session_id=session_id, library=library, recorder=recorder,
    )
    attach_data(session, data)
    return session


def attach_data(session: Session, data: UserData) -> list[dict]:
    if session.stage.kind is not StageKind.SETUP:
        raise StageViolation("data can only be loaded once, at setup")
    session.data = data
    session.record(
        "DataLoaded",
        {"data": data.to_record(),
         "stage_after": StageKind.INITIAL_DISCUSSION.value},
    )
    session.set_stage(Stage(StageKind.INITIAL_DISCUSSION))
    lib = session.library
    session.append(Author.SYSTEM, lib.render(TemplateId.INITIALIZATION))
    session.append(Author.SYSTEM, lib.render(TemplateId.API_INSTRUCTION))
    session.append(
        Author.SYSTEM,
        lib.render(
            TemplateId.USER_DATA_INTRO,
            {"examples": _numbered_block(data.chat_examples, "Example")},
        ),
    )
    session.append(Author.SYSTEM, lib.render(TemplateId.USER_DATA_ANALYSIS))
    return _model_loop(session)


def post_user_message(session: Session, text: str) -> list[dict]:
    """Append a user message and drive the model loop until it awaits input.

    Returns the user-visible messages produced this turn. Backend and
    protocol failures surface as a user-visible system error entry.
    """
    if session.stage.kind in (StageKind.SETUP, StageKind.ENDED):
        raise StageViolation(
            f"user messages are not accepted in stage {session.stage.label()}"
        )
    session.append(Author.USER, text, example=session.stage.current_example)
    try:
        return _model_loop(session)
    except (BackendError, ProtocolFailure, ModelLoopExceeded,
            StageViolation, IndexOutOfRange) as exc:
        session.errors.append(str(exc))
        visible_start = len(session.visible_log)
        session.append(
            Author.SYSTEM,
            ERROR_NOTICE_PREFIX + str(exc),
            example=session.stage.current_example,
        )
        return session.visible_log[visible_start:]


def _model_loop(session: Session) -> list[dict]:
    visible_start = len(session.visible_log)
    calls = 0
    violations = 0

    def one_completion() -> list[ApiCall] | ParseDiagnostic:
        nonlocal calls
        if calls >= MAX_MODEL_CALLS_PER_TURN:
            raise ModelLoopExceeded(
                f"model loop exceeded {MAX_MODEL_CALLS_PER_TURN} calls in one turn"
            )
        context = session.transcript.build_context(
            focus_example=session.stage.current_example
        )
        calls += 1
        return parse_model_response(session.complete_chat(context))

    while session.stage.kind is not StageKind.ENDED:
        parsed = one_completion()
        if isinstance(parsed, ParseDiagnostic):
            # one repair re-prompt, then surface the failure
            session.append(
                Author.SYSTEM, repair_message(parsed),
                example=session.stage.current_example,
            )
            parsed = one_completion()
            if isinstance(parsed, ParseDiagnostic):
                raise ProtocolFailure(parsed)
        produced_visible = False
        interrupted = False
        for call in parsed:
            try:
                shown = dispatch(session, call)
            except (StageViolation, IndexOutOfRange) as exc:
                violations += 1
                if violations > MAX_STAGE_VIOLATIONS_PER_TURN:
                    raise
                session.append(
                    Author.SYSTEM,
                    f"That call is not allowed right now: {exc} "
                    "Please continue with a valid API call.",
                    example=session.stage.current_example,
                )
                interrupted = True
                break
            if shown:
                produced_visible = True
            if session.stage.kind is StageKind.ENDED:
                break
        if produced_visible and not interrupted:
            break
    return session.visible_log[visible_start:]


def _require_stage(session: Session, call: ApiCall, kinds: tuple[StageKind, ...]):
    if session.stage.kind not in kinds:
        raise StageViolation(
            f"{SIGNATURES[call.function]} is not legal in stage "
            f"{session.stage.label()}."
        )


def _require_example_index(i: int):
    if not 1 <= i <= 3:
        raise IndexOutOfRange(f"example index {i} is out of range 1..3.")


_ACTIVE_STAGES = (
    StageKind.INITIAL_DISCUSSION,
    StageKind.OUTPUT_GENERATION,
    StageKind.OUTPUT_DISCUSSION,
    StageKind.FEEDBACK_ANALYSIS,
    StageKind.REFINEMENT,
)


def dispatch(session: Session, call: ApiCall, from_model: bool = True) -> list[dict]:
    """Apply one API call's system effects. Returns new user-visible entries."""
    visible_start = len(session.visible_log)
    session._stage_accum.append([])
    try:
        _dispatch_inner(session, call, from_model)
    finally:
        stages = session._stage_accum.pop()
        session.record(
            "CallDispatched",
            {"call": render_api_call(call), "from_model": from_model,
             "stages_after": stages},
        )
    return session.visible_log[visible_start:]


def _dispatch_inner(session: Session, call: ApiCall, from_model: bool) -> None:
    fn = call.function
    lib = session.library
    cur = session.stage.current_example

    if fn is ApiFunction.SUBMIT_MESSAGE_TO_USER:
        _require_stage(session, call, _ACTIVE_STAGES)
        session.append(Author.MODEL, render_api_call(call), example=cur)

    elif fn is ApiFunction.SUBMIT_PROMPT:
        _require_stage(
            session, call,
            (StageKind.INITIAL_DISCUSSION, StageKind.REFINEMENT),
        )
        if from_model:
            session.append(Author.MODEL, render_api_call(call))
        instruction = Instruction(
            text=call.args[0],
            version=len(session.instruction_history) + 1,
            created_turn=session.transcript.last_id,
        )
        session.instruction_history.append(instruction)
        session.iteration += 1
        session.record(
            "InstructionPushed",
            {"text": instruction.text, "version": instruction.version,
             "created_turn": instruction.created_turn},
        )
        session.set_stage(Stage(StageKind.OUTPUT_GENERATION))
        generate_outputs(session)
        session.append(
            Author.SYSTEM,
            lib.render(
                TemplateId.OUTPUTS_INTRO,
                {"outputs": _numbered_block(
                    [session.prompt_outputs[i] for i in (1, 2, 3)], "Example"
                )},
            ),
        )
        session.append(Author.SYSTEM, lib.render(TemplateId.OUTPUTS_ANALYSIS))

    elif fn is ApiFunction.SWITCH_TO_EXAMPLE:
        _require_stage(
            session, call,
            (StageKind.OUTPUT_GENERATION, StageKind.OUTPUT_DISCUSSION),
        )
        i = call.args[0]
        _require_example_index(i)
        if from_model:
            session.append(Author.MODEL, render_api_call(call), example=i)
        session.set_stage(Stage(StageKind.OUTPUT_DISCUSSION, i))
        session.append(
            Author.SYSTEM,
            lib.render(TemplateId.EXAMPLE_SWITCH, {"example_num": str(i)}),
            example=i,
        )

    elif fn is ApiFunction.SHOW_ORIGINAL_TEXT:
        _require_stage(session, call, _ACTIVE_STAGES)
        i = call.args[0]
        _require_example_index(i)
        session.append(Author.MODEL, render_api_call(call), example=cur)
        session.append(
            Author.SYSTEM,
            f"Original text of example {i}:\n\n"
            + session.data.chat_examples[i - 1],
            example=cur,
        )

    elif fn is ApiFunction.OUTPUT_ACCEPTED:
        i, output = call.args
        _require_example_index(i)
        if not (
            session.stage.kind is StageKind.OUTPUT_DISCUSSION
            and session.stage.current_example == i
        ):
            raise StageViolation(
                f"output_accepted({i}, ...) requires the discussion to be "
                f"focused on example {i}; current stage is "
                f"{session.stage.label()}."
            )
        session.append(Author.MODEL, render_api_call(call), example=i)
        session.accepted = register_accepted(
            session.accepted, i, session.data.chat_examples[i - 1], output,
            accepted_turn=session.transcript.last_id,
        )
        session.accepted_history.append(session.accepted[-1])
        session.record(
            "OutputAccepted",
            {"example_num": i, "output": output,
             "turn": session.transcript.last_id},
        )
        remaining = sorted({1, 2, 3} - session.accepted_nums())
        if remaining:
            dispatch(
                session,
                ApiCall(ApiFunction.SWITCH_TO_EXAMPLE, (remaining[0],)),
                from_model=False,
            )
        else:
            dispatch(
                session,
                ApiCall(ApiFunction.END_OUTPUTS_DISCUSSION, ()),
                from_model=False,
            )

    elif fn is ApiFunction.END_OUTPUTS_DISCUSSION:
        _require_stage(session, call, (StageKind.OUTPUT_DISCUSSION,))
        if session.accepted_nums() != {1, 2, 3}:
            raise StageViolation(
                "end_outputs_discussion requires all 3 outputs to be accepted; "
                f"accepted so far: {sorted(session.accepted_nums()) or 'none'}."
            )
        if from_model:
            session.append(Author.MODEL, render_api_call(call), example=cur)
        session.set_stage(Stage(StageKind.FEEDBACK_ANALYSIS))
        recommendations = run_feedback_analysis(session)
        session.append(
            Author.SYSTEM,
            lib.render(
                TemplateId.OUTPUTS_DISCUSSION,
                {"recommendations": recommendations},
            ),
        )
        session.set_stage(Stage(StageKind.REFINEMENT))

    elif fn is ApiFunction.CONVERSATION_END:
        _require_stage(session, call, (StageKind.REFINEMENT,))
        if session.accepted_nums() != {1, 2, 3}:
            raise StageViolation(
                "conversation_end requires the prompt and all 3 outputs to be "
                "approved."
            )
        if from_model:
            session.append(Author.MODEL, render_api_call(call))
        session.append(
            Author.SYSTEM,
            lib.render(
                TemplateId.CONVERSATION_END,
                {"model": session.target_backend.model_id},
            ),
        )
        session.record("Ended", {})
        session.set_stage(Stage(StageKind.ENDED))

    else:  # pragma: no cover - the enumeration is closed
        raise OrchestratorError(f"unhandled function {fn}")


def generate_outputs(session: Session) -> dict[int, str]:
    """Run the current instruction on each chat example in an isolated
    single-message side chat against the target model.
    """
    instruction = session.current_instruction()
    outputs: dict[int, str] = {}
    for i, example_text in enumerate(session.data.chat_examples, start=1):
        prompt = build_zs_prompt(
            PromptBundle(instruction, (), session.target_template),
            input_text=example_text,
        )
        side_id = session.transcript.allocate_side_id()
        session.append(Author.USER, prompt, side_id=side_id)
        context = session.transcript.build_context(side_id=side_id)
        outputs[i] = session.complete_target(context)
    session.prompt_outputs = outputs
    session.accepted = []
    session.iteration_marker = session.transcript.last_id
    session.record(
        "OutputsGenerated",
        {"outputs": {str(k): v for k, v in outputs.items()},
         "marker": session.iteration_marker},
    )
    return outputs


def run_feedback_analysis(session: Session) -> str:
    """Summarize the user's output feedback in a side chat and return the
    model's recommendations as free text.
    """
    instruction = session.current_instruction()
    lib = session.library
    discussion = [
        m
        for m in session.transcript.messages
        if m.side_id is None
        and m.example is not None
        and m.id > session.iteration_marker
    ]
    side_id = session.transcript.allocate_side_id()
    session.append(
        Author.SYSTEM,
        lib.render(TemplateId.OUTPUTS_COT_START, {"prompt": instruction.text}),
        side_id=side_id,
    )
    for m in discussion:
        session.append(m.author, m.content, side_id=side_id)
    session.append(
        Author.SYSTEM, lib.render(TemplateId.OUTPUTS_COT_END), side_id=side_id
    )
    context = session.transcript.build_context(side_id=side_id)
    # Side chats are free-text; the API-call format is not required here.
    return session.complete_chat(context)


def finalize(session: Session) -> dict[str, str]:
    """Return the final few-shot and zero-shot prompt renderings."""
    if session.stage.kind is not StageKind.ENDED:
        raise NotEnded("the session has not ended yet")
    return {
        "fs_prompt": build_fs_prompt(session.bundle(with_examples=True)),
        "zs_prompt": build_zs_prompt(session.bundle(with_examples=False)),
    }
