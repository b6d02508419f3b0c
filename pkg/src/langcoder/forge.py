"""Phase-1 front half: extract instructions and export the fine-tune dataset.

Extraction renders a prompt around a scored solution, asks the gateway, and
parses the reply into an InstructionSet; one automatic re-ask is allowed on
unparseable output. Extracted instructions become prompt/completion records
joined by the [/INST] separator, exported as JSONL together with the
training configuration.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .core import FinetuneConfig, FinetunePair, InstructionSet, Provenance, SolutionRecord, TaskSpec
from .errors import ExtractionError, InstructionParseError, ValidationError
from .gateway import ChatMessage, Gateway, assistant, user
from .instructions import parse_instruction_text, serialize_instruction
from .templates import TemplateLibrary

logger = logging.getLogger(__name__)


def render_extraction_prompt(
    solution: SolutionRecord, task: TaskSpec, templates: TemplateLibrary
) -> list[ChatMessage]:
    """Messages asking the model to distill a solution into three sections."""
    metric = task.require_metric()
    if not metric.name.value:
        raise ValidationError("task metric name must be non-empty")
    text = templates.render(
        "extract",
        description=task.description,
        metric=metric.name.value,
        data_type=task.modality.value,
        code=solution.source,
    )
    return [user(text)]


def _ask_and_parse(
    gateway: Gateway,
    messages: list[ChatMessage],
    templates: TemplateLibrary,
) -> tuple[InstructionSet, str]:
    """One completion plus at most one corrective re-ask; returns (set, raw)."""
    text = gateway.ask(messages)
    try:
        return parse_instruction_text(text), text
    except InstructionParseError as first_error:
        logger.info("unparseable instruction output, re-asking once: %s", first_error)
    retry_messages = messages + [assistant(text), user(templates.render("reask"))]
    retry_text = gateway.ask(retry_messages)
    try:
        return parse_instruction_text(retry_text), retry_text
    except InstructionParseError as exc:
        raise ExtractionError(
            f"output unparseable after re-ask: {exc}", raw_text=retry_text
        ) from exc


def extract_instruction(
    solution: SolutionRecord,
    task: TaskSpec,
    gateway: Gateway,
    templates: TemplateLibrary,
) -> InstructionSet:
    """Distill one scored solution into an InstructionSet via the gateway."""
    messages = render_extraction_prompt(solution, task, templates)
    parsed, _ = _ask_and_parse(gateway, messages, templates)
    return parsed.with_provenance(Provenance.EXTRACTED, rank=solution.rank)


def build_finetune_pair(
    task: TaskSpec, instruction: InstructionSet, templates: TemplateLibrary
) -> FinetunePair:
    """One training record: rank-conditioned task prompt, instruction completion."""
    if instruction.rank is None:
        raise ValidationError("instruction rank must be set to build a fine-tune pair")
    metric = task.require_metric()
    prompt = templates.render(
        "finetune_prompt",
        description=task.description,
        metric=metric.name.value,
        data_type=task.modality.value,
        rank=instruction.rank,
    )
    completion = serialize_instruction(instruction, include_extras=False)
    return FinetunePair(prompt=prompt, completion=completion)


def export_dataset(pairs: list[FinetunePair], path: str | Path) -> int:
    """Write pairs as JSONL ({"text": prompt[/INST]completion}); returns line count."""
    if not pairs:
        raise ValidationError("cannot export an empty dataset")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for pair in pairs:
            handle.write(json.dumps({"text": pair.serialize()}, ensure_ascii=False))
            handle.write("\n")
    return len(pairs)


def export_finetune_config(path: str | Path) -> FinetuneConfig:
    """Write the default training configuration as JSON and return it."""
    config = FinetuneConfig()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(config.to_dict(), handle, indent=2)
        handle.write("\n")
    return config
