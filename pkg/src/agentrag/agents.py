"""The four prompt-driven agents: planner, step definer, extractor, QA.

Each agent renders its template, calls the backend, and parses the reply into
a state record.  Unparseable replies get ``max_parse_repairs`` corrective
re-prompts before :class:`ParseFailure` is raised, so callers only ever see a
fully-populated record or an exception.
"""

from __future__ import annotations

import copy
import json
import logging
import re
import time
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .errors import ParseFailure, StateError
from .llm import ChatBackend, ChatMessage, CompletionRequest, DEFAULT_MAX_TOKENS, prompt_sha256
from .parsing import NoJSONFound, extract_json
from .prompts import load_template, output_formats, planner_exemplars
from .state import (
    PlanExecState,
    PlanState,
    QAAnswerState,
    StepTaskState,
    coerce_task_type,
    parse_success,
    render_history,
)

logger = logging.getLogger(__name__)

SENTINEL = "No related information from this document."
_SENTINEL_PREFIX = "no related information"
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")

REPAIR_MESSAGE = (
    "Your previous reply could not be parsed ({error}). "
    "Reply again with only the required JSON and nothing else."
)


def is_sentinel(text: str) -> bool:
    return text.strip().strip("[]\"' ").lower().startswith(_SENTINEL_PREFIX)


@dataclass(frozen=True)
class NoteList:
    notes: tuple[str, ...]
    is_empty_sentinel: bool = False

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        if self.is_empty_sentinel and self.notes:
            raise StateError("a sentinel note list carries no notes")

    @classmethod
    def empty(cls) -> "NoteList":
        return cls((), True)

    @property
    def has_evidence(self) -> bool:
        return bool(self.notes) and not self.is_empty_sentinel


# --------------------------------------------------------------------------
# output parsers; each raises ValueError (or StateError) on bad output


def _as_str_list(value: Any) -> list[str] | None:
    if isinstance(value, list) and all(isinstance(x, str) for x in value):
        return value
    return None


def parse_plan(raw: str, max_steps: int | None = None) -> PlanState:
    def accept(v):
        if isinstance(v, dict):
            v = v.get("step", v.get("steps"))
        items = _as_str_list(v)
        return items is not None and any(s.strip() for s in items)

    value = extract_json(raw, accept)
    analysis = ""
    if isinstance(value, dict):
        analysis = str(value.get("analysis", ""))
        value = value.get("step", value.get("steps"))
    steps = [s.strip() for s in value if s.strip()]
    if max_steps is not None and len(steps) > max_steps:
        logger.warning("plan has %d steps, keeping the first %d", len(steps), max_steps)
        steps = steps[:max_steps]
    return PlanState(analysis=analysis, steps=tuple(steps))


def parse_step_task(raw: str) -> StepTaskState:
    def accept(v):
        if not isinstance(v, dict):
            return False
        task = v.get("task", v.get("query"))
        return isinstance(task, str) and bool(task.strip())

    value = extract_json(raw, accept)
    task = value.get("task", value.get("query")).strip()
    return StepTaskState(task_type=coerce_task_type(value.get("type", value.get("task_type"))), task=task)


def parse_notes(raw: str) -> NoteList:
    if is_sentinel(raw):
        return NoteList.empty()

    def accept(v):
        if isinstance(v, dict):
            v = v.get("notes")
        return _as_str_list(v) is not None

    try:
        value = extract_json(raw, accept)
        if isinstance(value, dict):
            value = value["notes"]
    except NoJSONFound:
        value = [m.group(1) for line in raw.splitlines() if (m := _BULLET.match(line))]
        if not value:
            raise
    notes = [n.strip() for n in value if n.strip() and not is_sentinel(n)]
    if not notes:
        return NoteList.empty()
    return NoteList(tuple(notes))


def _rating(value: Any) -> int:
    try:
        return int(round(float(value)))
    except (TypeError, ValueError):
        return 0


def parse_answer(raw: str) -> QAAnswerState:
    value = extract_json(raw, lambda v: isinstance(v, dict) and "answer" in v)
    answer = value.get("answer")
    answer = "" if answer is None else str(answer).strip()
    success = parse_success(value.get("success", "yes" if answer else "no")) and bool(answer)
    return QAAnswerState(
        analysis=str(value.get("analysis", "")),
        answer=answer,
        success=success,
        rating=_rating(value.get("rating", 0)),
    )


# --------------------------------------------------------------------------


def render_context(notes: Sequence[NoteList], labels: Sequence[str] | None = None) -> str:
    blocks = []
    for i, nl in enumerate(notes):
        label = labels[i] if labels is not None else f"Document {i + 1}"
        lines = [f"- {n}" for n in nl.notes] if nl.has_evidence else [f"- {SENTINEL}"]
        blocks.append(f"{label}:\n" + "\n".join(lines))
    return "\n".join(blocks)


def _ensure_history_in_task(task: StepTaskState, history: PlanExecState) -> StepTaskState:
    missing = [o.answer for o in history.step_output if o.answer and o.answer not in task.task]
    if task.task_type != "aggregate" or not missing:
        return task
    return StepTaskState("aggregate", f"{task.task}\nResults of finished steps:\n{render_history(history)}")


class Agents:
    """Binds the four agents to one backend and one set of decoding settings.

    ``on_call`` receives one dict per model call:
    ``{agent, prompt, prompt_sha256, raw_output, parsed, duration_ms, attempt, error}``.
    """

    def __init__(
        self,
        llm: ChatBackend,
        *,
        model_id: str = "default",
        temperature: float = 0.0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        max_parse_repairs: int = 1,
        max_plan_steps: int | None = None,
        on_call: Callable[[dict], None] | None = None,
        clock: Callable[[], float] = time.perf_counter,
    ):
        self.llm = llm
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.max_parse_repairs = max_parse_repairs
        self.max_plan_steps = max_plan_steps
        self.on_call = on_call
        self.clock = clock

    def with_sink(self, on_call: Callable[[dict], None] | None) -> "Agents":
        clone = copy.copy(self)
        clone.on_call = on_call
        return clone

    def on_call_extend(self, records: Sequence[dict]) -> None:
        if self.on_call is not None:
            for r in records:
                self.on_call(r)

    def _messages(self, agent: str, user: str, system: str) -> list[ChatMessage]:
        hint = output_formats()[agent]
        msgs = [ChatMessage("system", f"{system}\n\n{hint}")]
        if agent == "planner":
            for question, output in planner_exemplars():
                msgs.append(ChatMessage("user", question))
                msgs.append(ChatMessage("assistant", output))
        msgs.append(ChatMessage("user", user))
        return msgs

    def _call(self, agent: str, messages: list[ChatMessage], parse: Callable[[str], Any]):
        for attempt in range(self.max_parse_repairs + 1):
            req = CompletionRequest(
                tuple(messages), temperature=self.temperature, max_tokens=self.max_tokens, model_id=self.model_id
            )
            start = self.clock()
            completion = self.llm.chat(req)
            duration_ms = (self.clock() - start) * 1000.0
            raw = completion.text
            try:
                parsed = parse(raw)
                error = None
            except (ValueError, StateError) as exc:
                parsed, error = None, str(exc) or type(exc).__name__
            if self.on_call is not None:
                self.on_call(
                    {
                        "agent": agent,
                        "prompt": [m.to_dict() for m in messages],
                        "prompt_sha256": prompt_sha256(messages),
                        "raw_output": raw,
                        "parsed": _jsonable(parsed),
                        "duration_ms": round(duration_ms, 3),
                        "attempt": attempt,
                        "error": error,
                    }
                )
            if error is None:
                return parsed
            logger.info("%s output unparseable on attempt %d: %s", agent, attempt + 1, error)
            messages = messages + [
                ChatMessage("assistant", raw),
                ChatMessage("user", REPAIR_MESSAGE.format(error=error)),
            ]
        raise ParseFailure(agent, f"unparseable after {self.max_parse_repairs + 1} attempts: {error}", raw)

    def plan(self, question: str) -> PlanState:
        if not question.strip():
            raise ValueError("question must be non-blank")
        system, user = load_template("planner").render(Question=question)
        return self._call(
            "planner", self._messages("planner", user, system), lambda raw: parse_plan(raw, self.max_plan_steps)
        )

    def define_step(
        self, question: str, plan: PlanState, step_index: int, history: PlanExecState
    ) -> StepTaskState:
        if not 0 <= step_index < len(plan.steps):
            raise StateError(f"step index {step_index} outside plan of {len(plan.steps)} steps")
        if history.n_completed != step_index:
            raise StateError(f"history covers {history.n_completed} steps, expected {step_index}")
        system, user = load_template("step_definer").render(
            plan=json.dumps(list(plan.steps), ensure_ascii=False),
            cur_step=plan.steps[step_index],
            memory=render_history(history),
        )
        task = self._call("step_definer", self._messages("step_definer", user, system), parse_step_task)
        return _ensure_history_in_task(task, history)

    def extract(self, passage: str, question: str) -> NoteList:
        if not passage.strip() or not question.strip():
            raise ValueError("passage and question must be non-blank")
        system, user = load_template("extractor").render(passage=passage, question=question)
        return self._call("extractor", self._messages("extractor", user, system), parse_notes)

    def answer(
        self, question: str, notes: Sequence[NoteList], labels: Sequence[str] | None = None
    ) -> QAAnswerState:
        if not notes:
            raise ValueError("answer needs at least one note list")
        if labels is not None and len(labels) != len(notes):
            raise ValueError("one label per note list")
        notes = [n if isinstance(n, NoteList) else NoteList(tuple(n)) for n in notes]
        system, user = load_template("qa").render(context=render_context(notes, labels), question=question)
        out = self._call("qa", self._messages("qa", user, system), parse_answer)
        if not any(n.has_evidence for n in notes):
            return QAAnswerState(analysis=out.analysis, answer="", success=False, rating=out.rating)
        return out


def _jsonable(value: Any) -> Any:
    if value is None:
        return None
    if isinstance(value, NoteList):
        return {"notes": list(value.notes), "is_empty_sentinel": value.is_empty_sentinel}
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return value


def plan(question: str, llm: ChatBackend, **kw) -> PlanState:
    return Agents(llm, **kw).plan(question)


def define_step(
    question: str, plan_state: PlanState, step_index: int, history: PlanExecState, llm: ChatBackend, **kw
) -> StepTaskState:
    return Agents(llm, **kw).define_step(question, plan_state, step_index, history)


def extract(passage: str, question: str, llm: ChatBackend, **kw) -> NoteList:
    return Agents(llm, **kw).extract(passage, question)


def answer(question: str, notes: Sequence[NoteList], llm: ChatBackend, **kw) -> QAAnswerState:
    labels = kw.pop("labels", None)
    return Agents(llm, **kw).answer(question, notes, labels)
