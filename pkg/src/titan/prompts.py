"""Prompt assembly for the three-phase pipeline.

Templates live as plain text assets so their wording stays frozen and
reviewable. Placeholders are substituted with ``str.replace`` rather than
``str.format`` because question text routinely contains braces.

The code-generation prompt is built from up to three clauses joined by
blank lines: the base request, an optional reasoning-steps clause, and an
optional extracted-inputs clause. Ablation modes drop exactly one clause.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

PHASE_INPUT = "input_extraction"
PHASE_STEPS = "step_extraction"
PHASE_CODEGEN = "codegen"

TEMPLATE_FILES = (
    "input_extraction.txt",
    "step_extraction.txt",
    "codegen_base.txt",
    "codegen_steps.txt",
    "codegen_inputs.txt",
    "pal_zs.txt",
)

_REQUIRED_PLACEHOLDERS = {
    "input_extraction.txt": ("{question}",),
    "step_extraction.txt": ("{question}",),
    "codegen_base.txt": ("{question}",),
    "codegen_steps.txt": ("{steps}",),
    "codegen_inputs.txt": ("{inputs}",),
    "pal_zs.txt": ("{question}",),
}


class TemplateError(ValueError):
    """A template file is missing or lacks its required placeholder."""


@dataclass
class PromptLibrary:
    templates: "dict[str, str]"

    def text(self, name: str) -> str:
        return self.templates[name]


@dataclass
class PromptRequest:
    phase: str
    messages: "list[dict]" = field(default_factory=list)


def load_templates(templates_dir: Optional[str] = None) -> PromptLibrary:
    """Load the six template assets, bundled by default.

    A directory override must supply all six files; partial overlays would
    make a run's prompt set ambiguous.
    """
    loaded = {}
    for name in TEMPLATE_FILES:
        if templates_dir is not None:
            path = Path(templates_dir) / name
            if not path.is_file():
                raise TemplateError(f"template {name} not found in {templates_dir}")
            raw = path.read_text(encoding="utf-8")
        else:
            raw = (
                resources.files("titan")
                .joinpath("templates")
                .joinpath(name)
                .read_text(encoding="utf-8")
            )
        text = raw.rstrip("\n")
        for placeholder in _REQUIRED_PLACEHOLDERS[name]:
            if placeholder not in text:
                raise TemplateError(f"template {name} lacks {placeholder}")
        loaded[name] = text
    return PromptLibrary(templates=loaded)


def _fill(template: str, **values: str) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def build_input_extraction(question: str, library: PromptLibrary) -> str:
    return _fill(library.text("input_extraction.txt"), question=question)


def build_step_extraction(question: str, library: PromptLibrary) -> str:
    return _fill(library.text("step_extraction.txt"), question=question)


def build_codegen(
    question: str,
    library: PromptLibrary,
    steps: Optional[str] = None,
    inputs: Optional[str] = None,
) -> str:
    parts = [_fill(library.text("codegen_base.txt"), question=question)]
    if steps is not None:
        parts.append(_fill(library.text("codegen_steps.txt"), steps=steps.strip()))
    if inputs is not None:
        parts.append(_fill(library.text("codegen_inputs.txt"), inputs=inputs.strip()))
    return "\n\n".join(parts)


def build_pal_zs(question: str, library: PromptLibrary) -> str:
    return _fill(library.text("pal_zs.txt"), question=question)


def messages_for(prompt_text: str, system: Optional[str] = None) -> "list[dict]":
    out = []
    if system:
        out.append({"role": "system", "content": system})
    out.append({"role": "user", "content": prompt_text})
    return out
