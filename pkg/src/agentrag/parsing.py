"""Pull a JSON value out of free-form model output."""

from __future__ import annotations

import json
import re
from typing import Any, Callable, Iterator

_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.S)
_CLOSE = {"[": "]", "{": "}"}


class NoJSONFound(ValueError):
    pass


def balanced_span(text: str, start: int) -> str | None:
    """Text from ``text[start]`` (``[`` or ``{``) to its matching bracket.

    String literals are skipped so brackets inside quotes do not count.
    Returns None when the span never closes or closes with the wrong bracket.
    """
    stack = [_CLOSE[text[start]]]
    in_str = False
    escaped = False
    for i in range(start + 1, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch in _CLOSE:
            stack.append(_CLOSE[ch])
        elif ch in "]}":
            if ch != stack.pop():
                return None
            if not stack:
                return text[start : i + 1]
    return None


def candidates(text: str) -> Iterator[Any]:
    """Every JSON value the parser is willing to consider, in priority order."""
    stripped = text.strip()
    if stripped[:1] in ("[", "{"):
        try:
            yield json.loads(stripped)
        except ValueError:
            pass
    for m in _FENCE.finditer(text):
        body = m.group(1).strip()
        if body[:1] in ("[", "{"):
            try:
                yield json.loads(body)
            except ValueError:
                pass
    for i, ch in enumerate(text):
        if ch in _CLOSE:
            span = balanced_span(text, i)
            if span is None:
                continue
            try:
                yield json.loads(span)
            except ValueError:
                continue


def extract_json(text: str, accept: Callable[[Any], bool] = lambda v: True) -> Any:
    for value in candidates(text):
        if accept(value):
            return value
    raise NoJSONFound("no acceptable JSON value in model output")
