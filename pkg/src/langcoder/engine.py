"""Phase-1 back half: candidate inference, refinement, manual selection.

Inference asks the instruction model once per rank token 1..3 and parses
each reply. Refinement runs a fixed two-role dialogue (critic enumerates
logical errors, decider picks and improves one candidate) whose decider
output must end in a machine-parseable ``CHOICE: <n>`` line followed by the
improved instruction text. Manual selection shows all three candidates to a
chooser callback.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace

from .core import InstructionSet, Provenance, TaskSpec
from .errors import InferenceError, InstructionParseError, RefinementError, SelectionError, ValidationError
from .gateway import ChatMessage, Gateway, assistant, user
from .instructions import parse_instruction_text, serialize_instruction
from .templates import TemplateLibrary

logger = logging.getLogger(__name__)

CANDIDATE_COUNT = 3
DEFAULT_REFINE_ROUNDS = 2
MANUAL_ATTEMPTS = 3

_CHOICE_LINE = re.compile(r"^\s*CHOICE:\s*(\d+)\s*$", re.MULTILINE)


@dataclass(frozen=True)
class CandidateSet:
    """Exactly three inferred instruction candidates, ranks 1..3."""

    candidates: tuple[InstructionSet, ...]
    task_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))
        ranks = sorted(c.rank for c in self.candidates)
        if ranks != [1, 2, 3]:
            raise ValidationError(f"candidate ranks must be exactly 1..3, got {ranks}")
        for candidate in self.candidates:
            if candidate.provenance is not Provenance.INFERRED:
                raise ValidationError("all candidates must have provenance 'inferred'")

    def by_rank(self, rank: int) -> InstructionSet:
        for candidate in self.candidates:
            if candidate.rank == rank:
                return candidate
        raise ValidationError(f"no candidate with rank {rank}")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "candidates": [c.to_dict() for c in self.candidates],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateSet":
        return cls(
            candidates=tuple(InstructionSet.from_dict(c) for c in data["candidates"]),
            task_id=data["task_id"],
        )


@dataclass(frozen=True)
class RefinementOutcome:
    chosen_index: int
    improved: InstructionSet
    critic_notes: str
    transcript: tuple[ChatMessage, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.chosen_index <= CANDIDATE_COUNT:
            raise ValidationError(f"chosen index must be in 1..3, got {self.chosen_index}")
        object.__setattr__(self, "transcript", tuple(self.transcript))

    def to_dict(self) -> dict:
        return {
            "chosen_index": self.chosen_index,
            "improved": self.improved.to_dict(),
            "critic_notes": self.critic_notes,
            "transcript": [m.to_dict() for m in self.transcript],
        }


def infer_candidates(
    task: TaskSpec, gateway: Gateway, templates: TemplateLibrary
) -> CandidateSet:
    """Three rank-conditioned completions, one per rank token 1..3."""
    metric = task.require_metric()
    candidates = []
    for rank in range(1, CANDIDATE_COUNT + 1):
        messages = [
            user(
                templates.render(
                    "infer",
                    description=task.description,
                    metric=metric.name.value,
                    data_type=task.modality.value,
                    rank=rank,
                )
            )
        ]
        text = gateway.ask(messages)
        try:
            parsed = parse_instruction_text(text)
        except InstructionParseError:
            logger.info("rank %d reply unparseable, re-asking once", rank)
            retry = messages + [assistant(text), user(templates.render("reask"))]
            retry_text = gateway.ask(retry)
            try:
                parsed = parse_instruction_text(retry_text)
            except InstructionParseError as exc:
                raise InferenceError(
                    f"candidate for rank {rank} unparseable after re-ask: {exc}", rank=rank
                ) from exc
        candidates.append(parsed.with_provenance(Provenance.INFERRED, rank=rank))
    return CandidateSet(candidates=tuple(candidates), task_id=task.id)


def render_candidates(candidates: CandidateSet) -> str:
    """Human- and prompt-facing listing of the three candidates."""
    blocks = []
    for index in range(1, CANDIDATE_COUNT + 1):
        candidate = candidates.by_rank(index)
        blocks.append(f"Candidate {index}:\n{serialize_instruction(candidate)}")
    return "\n".join(blocks)


def _parse_decider_output(text: str) -> tuple[int, InstructionSet]:
    matches = list(_CHOICE_LINE.finditer(text))
    if not matches:
        raise InstructionParseError("no CHOICE line in decider output", found=[], missing=[])
    last = matches[-1]
    index = int(last.group(1))
    if not 1 <= index <= CANDIDATE_COUNT:
        raise ValidationError(f"CHOICE index out of range: {index}")
    improved_text = text[last.end():]
    improved = parse_instruction_text(improved_text)
    return index, improved


def refine(
    candidates: CandidateSet,
    task: TaskSpec,
    gateway: Gateway,
    templates: TemplateLibrary,
    rounds: int = DEFAULT_REFINE_ROUNDS,
) -> RefinementOutcome:
    """Critic/decider dialogue ending in a choice plus an improved instruction.

    Issues exactly two gateway calls per round on the happy path, plus at
    most one corrective re-ask if the final decider output is unusable.
    """
    if rounds < 1:
        raise ValidationError(f"rounds must be >= 1, got {rounds}")
    metric = task.require_metric()
    critic_prompt = templates.render(
        "critic",
        description=task.description,
        metric=metric.name.value,
        data_type=task.modality.value,
        candidates=render_candidates(candidates),
    )
    decider_prompt = templates.render("decider")

    conversation: list[ChatMessage] = []
    critic_notes = ""
    decider_reply = ""
    for _ in range(rounds):
        conversation.append(user(critic_prompt))
        critic_notes = gateway.ask(conversation)
        conversation.append(assistant(critic_notes))
        conversation.append(user(decider_prompt))
        decider_reply = gateway.ask(conversation)
        conversation.append(assistant(decider_reply))

    try:
        index, improved = _parse_decider_output(decider_reply)
    except (InstructionParseError, ValidationError) as first_error:
        logger.info("decider output unusable (%s), re-asking once", first_error)
        conversation.append(user(templates.render("decider_reask")))
        decider_reply = gateway.ask(conversation)
        conversation.append(assistant(decider_reply))
        try:
            index, improved = _parse_decider_output(decider_reply)
        except (InstructionParseError, ValidationError) as exc:
            raise RefinementError(
                f"decider output unusable after re-ask: {exc}", transcript=list(conversation)
            ) from exc

    improved = improved.with_provenance(
        Provenance.REFINED, rank=candidates.by_rank(index).rank
    )
    return RefinementOutcome(
        chosen_index=index,
        improved=improved,
        critic_notes=critic_notes,
        transcript=tuple(conversation),
    )


def select_manual(candidates: CandidateSet, chooser) -> InstructionSet:
    """Show all three candidates to a chooser and return the picked one.

    The chooser is called with the rendered candidate listing and must
    return an index 1..3 (int or string); after three invalid answers the
    selection is aborted. Candidate texts are never mutated.
    """
    listing = render_candidates(candidates)
    for attempt in range(1, MANUAL_ATTEMPTS + 1):
        answer = chooser(listing)
        try:
            index = int(str(answer).strip())
        except (TypeError, ValueError):
            logger.info("unparseable choice %r (attempt %d)", answer, attempt)
            continue
        if 1 <= index <= CANDIDATE_COUNT:
            chosen = candidates.by_rank(index)
            return replace(chosen, provenance=Provenance.MANUAL)
        logger.info("choice %d out of range (attempt %d)", index, attempt)
    raise SelectionError(f"no valid choice after {MANUAL_ATTEMPTS} attempts")
