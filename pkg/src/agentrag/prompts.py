"""Plain-text prompt templates with ``{name}`` slots."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import TemplateError

AGENTS = ("planner", "step_definer", "extractor", "qa")
_SLOT = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def slots(text: str) -> set[str]:
    return set(_SLOT.findall(text))


def _fill(text: str, bindings: dict[str, str]) -> str:
    # single pass, so braces inside bound values are never re-expanded
    return _SLOT.sub(lambda m: bindings[m.group(1)], text)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system: str
    user: str

    @property
    def slots(self) -> set[str]:
        return slots(self.system) | slots(self.user)

    def render(self, **bindings: str) -> tuple[str, str]:
        expected = self.slots
        missing = expected - bindings.keys()
        extra = bindings.keys() - expected
        if missing or extra:
            raise TemplateError(
                f"template {self.name!r}: missing slots {sorted(missing)}, unknown bindings {sorted(extra)}"
            )
        values = {k: str(v) for k, v in bindings.items()}
        return _fill(self.system, values), _fill(self.user, values)


def _read(filename: str) -> str:
    return resources.files("agentrag").joinpath("prompts", filename).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    if name not in AGENTS:
        raise TemplateError(f"unknown template {name!r}")
    system = _read(f"{name}.system.txt").rstrip("\n")
    user = _read(f"{name}.user.txt").rstrip("\n")
    return PromptTemplate(name=name, system=system, user=user)


@lru_cache(maxsize=None)
def output_formats() -> dict[str, str]:
    data = json.loads(_read("output_formats.json"))
    return {k: v for k, v in data.items() if not k.startswith("_")}


@lru_cache(maxsize=None)
def planner_exemplars() -> tuple[tuple[str, str], ...]:
    """(question, assistant JSON) pairs used as few-shot turns."""
    data = json.loads(_read("planner_exemplars.json"))
    return tuple(
        (ex["question"], json.dumps(ex["output"], ensure_ascii=False)) for ex in data["exemplars"]
    )
