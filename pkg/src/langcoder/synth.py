"""Phase 2: staged code generation, integration, and bounded repair.

Code is generated stage by stage (preprocessing, architecture, training,
submission), each prompt carrying the matching instruction section plus all
prior snippets verbatim, then merged by one integration call. Failed runs
feed the captured error text back to the same gateway agent, at most three
times, with nothing added beyond program and error.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from .core import InstructionSet, TaskSpec
from .errors import ContractViolation, IntegrationError, RepairError, StageError, ValidationError
from .gateway import Gateway, canonical_digest, user
from .templates import TemplateLibrary

logger = logging.getLogger(__name__)

MAX_FIX_ATTEMPTS = 3

_FENCED_BLOCK = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


class Stage(str, Enum):
    PREPROCESSING = "preprocessing"
    ARCHITECTURE = "architecture"
    TRAINING = "training"
    SUBMISSION = "submission"


STAGE_ORDER = (Stage.PREPROCESSING, Stage.ARCHITECTURE, Stage.TRAINING, Stage.SUBMISSION)


@dataclass
class StagedProgram:
    """Accumulated state of one synthesis run."""

    snippets: dict[Stage, str] = field(default_factory=dict)
    integrated: str = ""
    fix_attempts: int = 0
    exchanges: list[tuple[str, str, int]] = field(default_factory=list)

    def record_exchange(self, label: str, digest: str, response_length: int) -> None:
        self.exchanges.append((label, digest, response_length))

    def repair_exchange_count(self) -> int:
        return sum(1 for label, _, _ in self.exchanges if label.startswith("repair"))


def extract_code(response: str) -> str:
    """All fenced code blocks joined by one blank line; whole text if none.

    Idempotent on its own output.
    """
    blocks = _FENCED_BLOCK.findall(response)
    if blocks:
        return "\n\n".join(block.strip("\n") for block in blocks).strip()
    return response.strip()


def _ask_code(gateway: Gateway, prompt: str, label: str, program: StagedProgram | None) -> str:
    request = gateway.build_request([user(prompt)])
    response = gateway.complete(request)
    if program is not None:
        program.record_exchange(label, canonical_digest(request), len(response))
    return extract_code(response)


def prior_context(prior: dict[Stage, str], stage: Stage) -> str:
    """Every snippet from stages before ``stage``, concatenated verbatim."""
    earlier = STAGE_ORDER[: STAGE_ORDER.index(stage)]
    return "\n\n".join(prior[s] for s in earlier)


def synth_stage(
    stage: Stage,
    instruction: InstructionSet,
    task: TaskSpec,
    prior: dict[Stage, str],
    gateway: Gateway,
    templates: TemplateLibrary,
    submission_filename: str = "submission.csv",
    program: StagedProgram | None = None,
) -> str:
    """Generate the snippet for one stage given all earlier snippets."""
    earlier = STAGE_ORDER[: STAGE_ORDER.index(stage)]
    missing = [s.value for s in earlier if s not in prior]
    if missing:
        raise ContractViolation(
            f"stage {stage.value!r} requested before earlier stages: {', '.join(missing)}"
        )

    if stage is Stage.PREPROCESSING:
        prompt = templates.render(
            "stage_preprocessing",
            section=instruction.preprocessing,
            description=task.description,
            data_files=", ".join(task.data_files) or "(none)",
        )
    elif stage is Stage.ARCHITECTURE:
        prompt = templates.render(
            "stage_architecture",
            section=instruction.architecture,
            prior_code=prior_context(prior, stage),
        )
    elif stage is Stage.TRAINING:
        prompt = templates.render(
            "stage_training",
            section=instruction.training,
            prior_code=prior_context(prior, stage),
        )
    else:
        prompt = templates.render(
            "stage_submission",
            metric=task.require_metric().name.value,
            submission_filename=submission_filename,
            prior_code=prior_context(prior, stage),
        )

    code = _ask_code(gateway, prompt, f"stage:{stage.value}", program)
    if not code:
        raise StageError(f"stage {stage.value!r} produced no code", stage=stage.value)
    return code


def integrate(
    snippets: dict[Stage, str],
    gateway: Gateway,
    templates: TemplateLibrary,
    program: StagedProgram | None = None,
) -> str:
    """Merge the four stage snippets into one program via a single call."""
    missing = [s.value for s in STAGE_ORDER if s not in snippets]
    if missing:
        raise ValidationError(f"cannot integrate, missing snippets: {', '.join(missing)}")
    prompt = templates.render(
        "integrate",
        preprocessing=snippets[Stage.PREPROCESSING],
        architecture=snippets[Stage.ARCHITECTURE],
        training=snippets[Stage.TRAINING],
        submission=snippets[Stage.SUBMISSION],
    )
    code = _ask_code(gateway, prompt, "integrate", program)
    if not code:
        raise IntegrationError("integration produced no code")
    if program is not None:
        program.integrated = code
    return code


def repair(
    program_text: str,
    stderr_tail: str,
    gateway: Gateway,
    templates: TemplateLibrary,
    attempt: int,
    program: StagedProgram | None = None,
) -> str:
    """Ask the same agent to fix a failed program given only its error text."""
    if not 1 <= attempt <= MAX_FIX_ATTEMPTS:
        raise ContractViolation(
            f"repair attempt {attempt} outside the 1..{MAX_FIX_ATTEMPTS} bound"
        )
    if not stderr_tail.strip():
        raise ValidationError("repair needs non-empty error output")
    prompt = templates.render("repair", program=program_text, stderr=stderr_tail)
    code = _ask_code(gateway, prompt, f"repair:{attempt}", program)
    if not code:
        raise RepairError(f"repair attempt {attempt} produced no code")
    return code
