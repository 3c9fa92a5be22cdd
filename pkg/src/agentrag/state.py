"""Shared state records passed between agents.

Every record is a frozen dataclass; "appending" to a plan execution returns a
new value whose earlier entries are the very same objects, so a published
snapshot can never change under a reader.  ``to_dict`` / ``from_dict`` use the
snake_case keys of the original TypedDict schemas (``step``, ``type`` ...).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Any, Iterable, Sequence

from .errors import StateError

logger = logging.getLogger(__name__)

TASK_TYPES = ("search", "aggregate")
EMPTY_HISTORY = "No steps completed yet."

_YES = {"yes", "y", "true", "1", "success", "successful", "succeeded"}


def parse_success(value: Any) -> bool:
    """Map a yes/no-like model value to a bool; anything unrecognised is False."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value == 1
    if isinstance(value, str):
        return value.strip().strip(".").lower() in _YES
    return False


def coerce_task_type(value: Any) -> str:
    text = str(value or "").strip().lower()
    if text in TASK_TYPES:
        return text
    logger.warning("unknown task type %r, treating as search", value)
    return "search"


@dataclass(frozen=True)
class PlanState:
    analysis: str
    steps: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise StateError("a plan needs at least one step")
        if any(not s.strip() for s in self.steps):
            raise StateError("plan steps must be non-blank")

    def to_dict(self) -> dict:
        return {"analysis": self.analysis, "step": list(self.steps)}

    @classmethod
    def from_dict(cls, d: dict) -> "PlanState":
        return cls(analysis=d.get("analysis", ""), steps=tuple(d["step"]))


@dataclass(frozen=True)
class StepTaskState:
    task_type: str
    task: str

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise StateError(f"task type must be one of {TASK_TYPES}, got {self.task_type!r}")
        if not self.task.strip():
            raise StateError("step task must be non-blank")

    def to_dict(self) -> dict:
        return {"type": self.task_type, "task": self.task}

    @classmethod
    def from_dict(cls, d: dict) -> "StepTaskState":
        return cls(task_type=d["type"], task=d["task"])


@dataclass(frozen=True)
class QAAnswerState:
    analysis: str
    answer: str
    success: bool
    rating: int = 0

    def __post_init__(self):
        if isinstance(self.rating, bool) or not isinstance(self.rating, int):
            raise StateError(f"rating must be an integer, got {self.rating!r}")
        if self.success and not self.answer.strip():
            raise StateError("a successful answer must carry answer text")

    @classmethod
    def failed(cls, analysis: str) -> "QAAnswerState":
        return cls(analysis=analysis, answer="", success=False, rating=0)

    def to_dict(self) -> dict:
        return {
            "analysis": self.analysis,
            "answer": self.answer,
            "success": self.success,
            "rating": self.rating,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAAnswerState":
        return cls(
            analysis=d.get("analysis", ""),
            answer=d.get("answer", ""),
            success=parse_success(d.get("success")),
            rating=int(d.get("rating", 0)),
        )


@dataclass(frozen=True)
class PlanSummaryState:
    output: str
    answer: str
    score: int

    def to_dict(self) -> dict:
        return {"output": self.output, "answer": self.answer, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> "PlanSummaryState":
        return cls(output=d["output"], answer=d["answer"], score=int(d["score"]))


@dataclass(frozen=True)
class PlanExecState:
    original_question: str
    plan: tuple[str, ...]
    step_question: tuple[StepTaskState, ...] = ()
    step_output: tuple[QAAnswerState, ...] = ()
    step_docs_ids: tuple[tuple[str, ...], ...] = ()
    step_notes: tuple[tuple[str, ...], ...] = ()
    plan_summary: PlanSummaryState | None = None
    stop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "plan", tuple(self.plan))
        object.__setattr__(self, "step_question", tuple(self.step_question))
        object.__setattr__(self, "step_output", tuple(self.step_output))
        object.__setattr__(self, "step_docs_ids", tuple(tuple(x) for x in self.step_docs_ids))
        object.__setattr__(self, "step_notes", tuple(tuple(x) for x in self.step_notes))
        lengths = {
            len(self.step_question),
            len(self.step_output),
            len(self.step_docs_ids),
            len(self.step_notes),
        }
        if len(lengths) != 1:
            raise StateError("per-step lists are misaligned")
        if self.n_completed > len(self.plan):
            raise StateError("more completed steps than plan steps")

    @property
    def n_completed(self) -> int:
        return len(self.step_question)

    @property
    def complete(self) -> bool:
        return self.n_completed == len(self.plan)

    def to_dict(self) -> dict:
        return {
            "original_question": self.original_question,
            "plan": list(self.plan),
            "step_question": [t.to_dict() for t in self.step_question],
            "step_output": [o.to_dict() for o in self.step_output],
            "step_docs_ids": [list(ids) for ids in self.step_docs_ids],
            "step_notes": [list(n) for n in self.step_notes],
            "plan_summary": self.plan_summary.to_dict() if self.plan_summary else None,
            "stop": self.stop,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanExecState":
        summary = d.get("plan_summary")
        return cls(
            original_question=d["original_question"],
            plan=tuple(d["plan"]),
            step_question=tuple(StepTaskState.from_dict(x) for x in d["step_question"]),
            step_output=tuple(QAAnswerState.from_dict(x) for x in d["step_output"]),
            step_docs_ids=tuple(tuple(x) for x in d["step_docs_ids"]),
            step_notes=tuple(tuple(x) for x in d["step_notes"]),
            plan_summary=PlanSummaryState.from_dict(summary) if summary else None,
            stop=bool(d.get("stop", False)),
        )


@dataclass(frozen=True)
class RagState:
    question: str
    documents: tuple[str, ...] = ()
    doc_ids: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    final_raw_answer: QAAnswerState | None = None

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        object.__setattr__(self, "notes", tuple(self.notes))
        if len(self.documents) != len(self.doc_ids):
            raise StateError("documents and doc_ids must align")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise StateError("doc_ids must be distinct within one retrieval")

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "documents": list(self.documents),
            "doc_ids": list(self.doc_ids),
            "notes": list(self.notes),
            "final_raw_answer": self.final_raw_answer.to_dict() if self.final_raw_answer else None,
        }


@dataclass(frozen=True)
class GraphState:
    original_question: str
    plan: tuple[str, ...] = ()
    past_exp: tuple[PlanExecState, ...] = ()
    final_answer: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "plan", tuple(self.plan))
        object.__setattr__(self, "past_exp", tuple(self.past_exp))

    def to_dict(self) -> dict:
        return {
            "original_question": self.original_question,
            "plan": list(self.plan),
            "past_exp": [e.to_dict() for e in self.past_exp],
            "final_answer": self.final_answer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraphState":
        return cls(
            original_question=d["original_question"],
            plan=tuple(d["plan"]),
            past_exp=tuple(PlanExecState.from_dict(e) for e in d["past_exp"]),
            final_answer=d.get("final_answer"),
        )


def dumps(obj: Any) -> str:
    """Canonical JSON used for transcripts and golden diffs."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_history(exec_state: PlanExecState) -> str:
    if exec_state.n_completed == 0:
        return EMPTY_HISTORY
    lines = []
    for i, (task, out) in enumerate(zip(exec_state.step_question, exec_state.step_output), start=1):
        lines.append(f"Step {i}: {task.task} → Answer: {out.answer}")
    return "\n".join(lines)


def append_step(
    exec_state: PlanExecState,
    task: StepTaskState,
    out: QAAnswerState,
    ids: Sequence[str],
    notes: Iterable[str],
) -> PlanExecState:
    if exec_state.n_completed >= len(exec_state.plan):
        raise StateError(
            f"plan has {len(exec_state.plan)} steps; refusing to append step {exec_state.n_completed + 1}"
        )
    return replace(
        exec_state,
        step_question=exec_state.step_question + (task,),
        step_output=exec_state.step_output + (out,),
        step_docs_ids=exec_state.step_docs_ids + (tuple(ids),),
        step_notes=exec_state.step_notes + (tuple(notes),),
    )
