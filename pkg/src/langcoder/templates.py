"""Prompt templates as external text assets with required-slot manifests.

Prompt wording is configuration, not code: each template lives in a .txt
file with ``{slot}`` placeholders, and ``manifest.json`` declares which
slots every template requires. Substitution is single-pass, so braces
inside bound values (e.g. source code) are never re-interpreted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import TemplateError

SLOT_PATTERN = re.compile(r"\{([a-z][a-z0-9_]*)\}")

_PACKAGED_DIR = Path(__file__).parent / "templates"


@dataclass(frozen=True)
class PromptTemplate:
    """A named template body whose required slots each appear exactly once."""

    name: str
    body: str
    required_slots: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "required_slots", frozenset(self.required_slots))
        found = SLOT_PATTERN.findall(self.body)
        for slot in self.required_slots:
            count = found.count(slot)
            if count != 1:
                raise TemplateError(
                    f"template {self.name!r}: required slot {{{slot}}} appears "
                    f"{count} times, expected exactly once"
                )

    def render(self, **bindings: Any) -> str:
        """Substitute every slot in one pass; unbound slots are an error."""

        def _substitute(match: re.Match[str]) -> str:
            slot = match.group(1)
            if slot not in bindings:
                raise TemplateError(f"template {self.name!r}: slot {{{slot}}} is unbound")
            return str(bindings[slot])

        return SLOT_PATTERN.sub(_substitute, self.body)


class TemplateLibrary:
    """All templates from one directory, validated against its manifest."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = dict(templates)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateLibrary":
        root = Path(directory) if directory is not None else _PACKAGED_DIR
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise TemplateError(f"no template manifest at {manifest_path}")
        with open(manifest_path, encoding="utf-8") as handle:
            manifest = json.load(handle)
        templates = {}
        for name, entry in manifest.items():
            asset = root / entry["file"]
            if not asset.exists():
                raise TemplateError(f"template asset {asset} listed in manifest is missing")
            body = asset.read_text(encoding="utf-8")
            templates[name] = PromptTemplate(
                name=name, body=body, required_slots=frozenset(entry["slots"])
            )
        return cls(templates)

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise TemplateError(f"no template named {name!r}") from None

    def render(self, name: str, **bindings: Any) -> str:
        return self.get(name).render(**bindings)

    def names(self) -> list[str]:
        return sorted(self._templates)
