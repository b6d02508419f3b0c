"""Shared grammar for instruction text: one parser, one serializer.

Instruction text is organized under short ``Header:`` lines. The three
canonical sections (Data Preprocessing, Model Architecture, Model Training)
are required; any other headers are preserved as extra sections in document
order. Bullet lines are never treated as headers, so section bodies keep
their ``-``/``•``/numbered markers intact.
"""

from __future__ import annotations

import re

from .core import InstructionSet, Provenance
from .errors import InstructionParseError

PREPROCESSING_HEADER = "Data Preprocessing"
ARCHITECTURE_HEADER = "Model Architecture"
TRAINING_HEADER = "Model Training"

_CANONICAL = {
    PREPROCESSING_HEADER.lower(): "preprocessing",
    ARCHITECTURE_HEADER.lower(): "architecture",
    TRAINING_HEADER.lower(): "training",
}

# A header is a short title ending in a colon, optionally with inline
# content after it. Commas and periods in the title disqualify a line, which
# keeps ordinary prose containing colons inside section bodies.
_HEADER_LINE = re.compile(r"^\s{0,3}([A-Za-z][A-Za-z0-9&/()' -]{0,59}?)\s*:\s*(.*)$")
_BULLET_LINE = re.compile(r"^\s*(?:[-•*◦]|\d+[.)])")


def parse_instruction_text(text: str) -> InstructionSet:
    """Split raw model output into an InstructionSet.

    Raises InstructionParseError listing which canonical sections were found
    and which are missing or empty. Callers stamp rank/provenance afterwards.
    """
    if not text.strip():
        raise InstructionParseError(
            "instruction text is empty",
            found=[],
            missing=[PREPROCESSING_HEADER, ARCHITECTURE_HEADER, TRAINING_HEADER],
        )

    sections: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        if not _BULLET_LINE.match(line):
            match = _HEADER_LINE.match(line)
            if match:
                header = match.group(1).strip()
                inline = match.group(2).strip()
                current = [inline] if inline else []
                sections.append((header, current))
                continue
        if current is not None:
            current.append(line)

    canonical: dict[str, str] = {}
    extras: list[tuple[str, str]] = []
    extra_index: dict[str, int] = {}
    for header, lines in sections:
        body = "\n".join(lines).strip()
        if not body:
            continue
        slot = _CANONICAL.get(header.lower())
        if slot is not None:
            canonical[slot] = f"{canonical[slot]}\n\n{body}" if slot in canonical else body
        else:
            key = header.lower()
            if key in extra_index:
                kept_header, kept_body = extras[extra_index[key]]
                extras[extra_index[key]] = (kept_header, f"{kept_body}\n\n{body}")
            else:
                extra_index[key] = len(extras)
                extras.append((header, body))

    found = [h for h, slot in zip(
        (PREPROCESSING_HEADER, ARCHITECTURE_HEADER, TRAINING_HEADER),
        ("preprocessing", "architecture", "training"),
    ) if slot in canonical]
    missing = [h for h, slot in zip(
        (PREPROCESSING_HEADER, ARCHITECTURE_HEADER, TRAINING_HEADER),
        ("preprocessing", "architecture", "training"),
    ) if slot not in canonical]
    if missing:
        raise InstructionParseError(
            f"missing or empty sections: {', '.join(missing)} (found: {', '.join(found) or 'none'})",
            found=found,
            missing=missing,
        )

    return InstructionSet(
        preprocessing=canonical["preprocessing"],
        architecture=canonical["architecture"],
        training=canonical["training"],
        extra_sections=tuple(extras),
        provenance=Provenance.EXTRACTED,
    )


def serialize_instruction(instruction: InstructionSet, include_extras: bool = True) -> str:
    """Render an InstructionSet back to canonical header/body text.

    parse_instruction_text(serialize_instruction(x)) recovers the three
    canonical sections of x.
    """
    parts = [
        f"{PREPROCESSING_HEADER}:\n{instruction.preprocessing}",
        f"{ARCHITECTURE_HEADER}:\n{instruction.architecture}",
        f"{TRAINING_HEADER}:\n{instruction.training}",
    ]
    if include_extras:
        parts.extend(f"{header}:\n{body}" for header, body in instruction.extra_sections)
    return "\n\n".join(parts) + "\n"
