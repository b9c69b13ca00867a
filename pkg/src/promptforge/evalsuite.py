"""Blind best/worst ranking evaluation, rank aggregation, the four-statement
survey, and per-session analysis metrics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .backends import BackendError
from .chatstore import Author
from .promptkit import PromptBundle, Instruction, build_fs_prompt, build_zs_prompt
from .orchestrator import NotEnded, Session, StageKind
from .templates import TemplateId

PROVENANCES = ("baseline", "zs", "fs")
RANKS = ("best", "middle", "worst")


class EvalError(Exception):
    pass


class NoEvalExamples(EvalError):
    pass


class SamePosition(EvalError):
    pass


class AlreadyRanked(EvalError):
    pass


class UnrankedItems(EvalError):
    def __init__(self, item_ids: list[str]):
        super().__init__(f"unranked items: {item_ids}")
        self.item_ids = item_ids


class OutOfRange(EvalError):
    pass


class Duplicate(EvalError):
    pass


@dataclass(frozen=True)
class EvaluationItem:
    """One test input with three provenance-hidden candidate outputs.

    ``candidates[p]`` maps provenance to text; ``display_order[pos]`` names
    the provenance shown at display position ``pos``.
    """

    item_id: str
    input_text: str
    candidates: dict[str, str]
    display_order: tuple[str, str, str]
    best: int | None = None
    worst: int | None = None

    @property
    def ranked(self) -> bool:
        return self.best is not None and self.worst is not None

    @property
    def middle(self) -> int | None:
        if not self.ranked:
            return None
        return ({0, 1, 2} - {self.best, self.worst}).pop()

    def displayed_texts(self) -> list[str]:
        return [self.candidates[p] for p in self.display_order]

    def public_record(self) -> dict:
        """Client serialization; carries no provenance information."""
        return {
            "item_id": self.item_id,
            "input_text": self.input_text,
            "candidates": self.displayed_texts(),
            "best": self.best,
            "worst": self.worst,
        }

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "input_text": self.input_text,
            "candidates": dict(self.candidates),
            "display_order": list(self.display_order),
            "best": self.best,
            "worst": self.worst,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvaluationItem":
        return cls(
            item_id=rec["item_id"],
            input_text=rec["input_text"],
            candidates=dict(rec["candidates"]),
            display_order=tuple(rec["display_order"]),
            best=rec.get("best"),
            worst=rec.get("worst"),
        )


@dataclass(frozen=True)
class SurveyResponse:
    """Likert scores 1..5 for the four survey statements."""

    satisfaction: int
    thinking_gain: int
    pleasantness: int
    convergence_time: int

    def __post_init__(self):
        for name, score in self.as_dict().items():
            if not 1 <= score <= 5:
                raise OutOfRange(f"{name} score {score} outside 1..5")

    def as_dict(self) -> dict[str, int]:
        return {
            "satisfaction": self.satisfaction,
            "thinking_gain": self.thinking_gain,
            "pleasantness": self.pleasantness,
            "convergence_time": self.convergence_time,
        }


@dataclass(frozen=True)
class SessionStats:
    turns: int
    instruction_distance_chars: int
    iterations: int


RankTally = dict[str, dict[str, int]]  # provenance -> rank -> count


def _target_generate(session: Session, prompt: str) -> str:
    from .backends import ChatRequest, complete

    session.target_calls += 1
    req = ChatRequest(messages=[{"role": "user", "content": prompt}])
    return complete(session.target_backend, req).content


def build_evaluation(session: Session, seed: int = 0) -> list[EvaluationItem]:
    """Generate baseline/ZS/FS outputs for every evaluation example and
    assign each item a seeded random display order.
    """
    if session.stage.kind is not StageKind.ENDED:
        raise NotEnded("evaluation requires an ended session")
    if not session.data or not session.data.eval_examples:
        raise NoEvalExamples("the user data contains no evaluation examples")

    baseline_instruction = Instruction(
        text=session.library.render(TemplateId.BASELINE_PROMPT), version=1
    )
    baseline_bundle = PromptBundle(
        baseline_instruction, (), session.target_template
    )
    zs_bundle = session.bundle(with_examples=False)
    fs_bundle = session.bundle(with_examples=True)

    rng = random.Random(seed)
    items: list[EvaluationItem] = []
    for idx, input_text in enumerate(session.data.eval_examples, start=1):
        prompts = {
            "baseline": build_zs_prompt(baseline_bundle, input_text),
            "zs": build_zs_prompt(zs_bundle, input_text),
            "fs": build_fs_prompt(fs_bundle, input_text),
        }
        try:
            candidates = {
                p: _target_generate(session, prompts[p]) for p in PROVENANCES
            }
        except BackendError as exc:
            session.errors.append(f"evaluation item {idx} skipped: {exc}")
            continue
        order = list(PROVENANCES)
        rng.shuffle(order)
        items.append(
            EvaluationItem(
                item_id=f"item-{idx}",
                input_text=input_text,
                candidates=candidates,
                display_order=tuple(order),
            )
        )
    session.eval_items = items
    session.record(
        "OutputsGenerated",
        {"context": "evaluation", "seed": seed,
         "items": [it.to_record() for it in items]},
    )
    return items


def record_ranking(
    item: EvaluationItem, best: int, worst: int, overwrite: bool = False
) -> EvaluationItem:
    """Store a best/worst choice for one item; middle is inferred."""
    if not (0 <= best <= 2 and 0 <= worst <= 2):
        raise OutOfRange("positions must be within 0..2")
    if best == worst:
        raise SamePosition("best and worst cannot be the same candidate")
    if item.ranked and not overwrite:
        raise AlreadyRanked(f"{item.item_id} is already ranked")
    return replace(item, best=best, worst=worst)


def aggregate(items: list[EvaluationItem]) -> RankTally:
    """Map display positions back to provenance and tally rank frequencies."""
    unranked = [it.item_id for it in items if not it.ranked]
    if unranked:
        raise UnrankedItems(unranked)
    tally: RankTally = {p: {r: 0 for r in RANKS} for p in PROVENANCES}
    for it in items:
        tally[it.display_order[it.best]]["best"] += 1
        tally[it.display_order[it.middle]]["middle"] += 1
        tally[it.display_order[it.worst]]["worst"] += 1
    return tally


def instruction_distance(a: str, b: str) -> int:
    """Character-level Levenshtein edit distance."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def session_stats(session: Session) -> SessionStats:
    """Turn count, first-to-final instruction distance, and iteration count.

    Turns count main-channel messages authored by the user or the model;
    system-injected instructions are excluded.
    """
    if session.stage.kind is not StageKind.ENDED:
        raise NotEnded("session statistics require an ended session")
    turns = sum(
        1
        for m in session.transcript.messages
        if m.side_id is None and m.author in (Author.USER, Author.MODEL)
    )
    first = session.instruction_history[0].text
    final = session.instruction_history[-1].text
    return SessionStats(
        turns=turns,
        instruction_distance_chars=instruction_distance(first, final),
        iterations=session.iteration,
    )


def record_survey(session: Session, response: SurveyResponse) -> SurveyResponse:
    """Persist the survey once per session."""
    if session.stage.kind is not StageKind.ENDED:
        raise NotEnded("the survey opens when the session ends")
    if session.survey is not None:
        raise Duplicate("a survey response was already recorded")
    session.survey = (
        response.satisfaction,
        response.thinking_gain,
        response.pleasantness,
        response.convergence_time,
    )
    session.record("SurveyRecorded", {"scores": list(session.survey)})
    return response
