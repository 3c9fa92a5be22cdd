"""Plan -> (define step -> retrieve -> extract -> answer)* execution loop."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

from .agents import Agents, NoteList
from .errors import BackendError, EmbeddingError, ParseFailure, RunAborted, StateError
from .llm import ChatBackend, RecordingBackend
from .retrieval import Embedder, VectorIndex, atomic_write, search
from .state import (
    GraphState,
    PlanExecState,
    PlanState,
    PlanSummaryState,
    QAAnswerState,
    StepTaskState,
    append_step,
    dumps,
    render_history,
)

logger = logging.getLogger(__name__)

TRANSCRIPT_VERSION = 1

ANSWERED = "answered"
UNANSWERED = "unanswered"
PARSE_FAILURE = "parse_failure"
ABORTED = "aborted"


@dataclass(frozen=True)
class EngineConfig:
    k: int = 5
    max_plan_steps: int = 8
    planner_enabled: bool = True
    extractor_enabled: bool = True
    max_parse_repairs: int = 1
    max_replans: int = 0
    model_id: str = "default"
    temperature: float = 0.0
    max_tokens: int = 1024
    # steps whose QA rating falls below this count as unsuccessful; None = off
    rating_threshold: int | None = None
    # concurrency only, never changes results, so it is left out of the hash
    extract_workers: int = 4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_plan_steps < 1:
            raise ValueError("max_plan_steps must be >= 1")
        if self.max_replans < 0 or self.max_parse_repairs < 0:
            raise ValueError("max_replans and max_parse_repairs must be >= 0")
        if self.extract_workers < 1:
            raise ValueError("extract_workers must be >= 1")

    def behaviour(self) -> dict:
        d = asdict(self)
        d.pop("extract_workers")
        return d

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def config_hash(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class RunTranscript:
    graph: GraphState
    status: str
    config: dict
    config_hash: str
    plans: list[dict] = field(default_factory=list)
    agent_calls: list[dict] = field(default_factory=list)
    retrievals: list[dict] = field(default_factory=list)
    cassette: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    error: str | None = None
    sources: dict = field(default_factory=dict)

    @property
    def final_answer(self) -> str:
        return self.graph.final_answer or ""

    def calls(self, agent: str, first_attempt_only: bool = True) -> list[dict]:
        return [c for c in self.agent_calls if c["agent"] == agent and (c["attempt"] == 0 or not first_attempt_only)]

    def to_dict(self) -> dict:
        return {
            "version": TRANSCRIPT_VERSION,
            "graph_state": self.graph.to_dict(),
            "status": self.status,
            "error": self.error,
            "config": self.config,
            "config_hash": self.config_hash,
            "sources": self.sources,
            "plans": self.plans,
            "agent_calls": self.agent_calls,
            "retrievals": self.retrievals,
            "cassette": self.cassette,
            "timing": self.timing,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunTranscript":
        return cls(
            graph=GraphState.from_dict(d["graph_state"]),
            status=d["status"],
            config=d["config"],
            config_hash=d["config_hash"],
            plans=d.get("plans", []),
            agent_calls=d.get("agent_calls", []),
            retrievals=d.get("retrievals", []),
            cassette=d.get("cassette", []),
            timing=d.get("timing", {}),
            error=d.get("error"),
            sources=d.get("sources", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunTranscript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def write(self, path: str | Path) -> None:
        atomic_write(path, self.to_json().encode("utf-8"))


def finalize(exec_state: PlanExecState) -> tuple[str, PlanSummaryState]:
    """Final answer is the answer of the last step that succeeded."""
    if not exec_state.complete:
        raise StateError(f"finalize needs all {len(exec_state.plan)} steps, have {exec_state.n_completed}")
    answer = ""
    for out in reversed(exec_state.step_output):
        if out.success:
            answer = out.answer
            break
    score = exec_state.step_output[-1].rating if exec_state.step_output else 0
    return answer, PlanSummaryState(output=render_history(exec_state), answer=answer, score=score)


class _StepFailed(Exception):
    def __init__(self, exec_state: PlanExecState, cause: ParseFailure):
        self.exec_state = exec_state
        self.cause = cause


class Engine:
    """One configured engine; ``run`` may be called any number of times.

    ``clock`` feeds every duration in the transcript.  Pass ``lambda: 0.0``
    for byte-reproducible transcripts.
    """

    def __init__(
        self,
        cfg: EngineConfig,
        llm: ChatBackend,
        index: VectorIndex,
        embedder: Embedder,
        *,
        clock: Callable[[], float] = time.perf_counter,
        sources: dict | None = None,
    ):
        if embedder.id != index.embedder_id:
            raise EmbeddingError(f"index was built with {index.embedder_id!r}, engine has {embedder.id!r}")
        self.cfg = cfg
        self.llm = llm
        self.index = index
        self.embedder = embedder
        self.clock = clock
        self.sources = dict(sources or {})

    def config_dict(self) -> dict:
        return {**self.cfg.behaviour(), "embedder_id": self.embedder.id, "corpus_hash": self.index.corpus_hash}

    def run(self, question: str) -> GraphState:
        return self.execute(question).graph

    def execute(self, question: str) -> RunTranscript:
        if not question.strip():
            raise ValueError("question must be non-blank")
        cfg = self.cfg
        recorder = RecordingBackend(self.llm)
        calls: list[dict] = []
        agents = Agents(
            recorder,
            model_id=cfg.model_id,
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
            max_parse_repairs=cfg.max_parse_repairs,
            max_plan_steps=cfg.max_plan_steps,
            on_call=calls.append,
            clock=self.clock,
        )
        conf = self.config_dict()
        transcript = RunTranscript(
            graph=GraphState(question), status=ABORTED, config=conf, config_hash=config_hash(conf),
            agent_calls=calls, sources=self.sources,
        )
        start = self.clock()
        graph = transcript.graph
        exec_state = None  # execution in progress, not yet in graph.past_exp
        try:
            for attempt in range(cfg.max_replans + 1):
                last_attempt = attempt == cfg.max_replans
                if cfg.planner_enabled:
                    plan_state = agents.plan(question)
                else:
                    plan_state = PlanState(analysis="", steps=(question,))
                transcript.plans.append(plan_state.to_dict())
                graph = replace(graph, plan=plan_state.steps)
                exec_state = PlanExecState(question, plan_state.steps)
                for i in range(len(plan_state.steps)):
                    exec_state = self.run_step(exec_state, i, plan_state, agents, transcript)
                answer, summary = finalize(exec_state)
                done = bool(answer) or last_attempt
                graph = replace(
                    graph, past_exp=graph.past_exp + (replace(exec_state, plan_summary=summary, stop=done),)
                )
                exec_state = None
                if done:
                    graph = replace(graph, final_answer=answer)
                    break
                logger.info("plan execution %d produced no answer, re-planning", attempt + 1)
            transcript.status = ANSWERED if graph.final_answer else UNANSWERED
        except _StepFailed as failed:
            graph = replace(graph, past_exp=graph.past_exp + (replace(failed.exec_state, stop=True),), final_answer="")
            transcript.status = PARSE_FAILURE
            transcript.error = str(failed.cause)
        except ParseFailure as exc:
            # planner failure: no execution exists yet
            graph = replace(graph, final_answer="")
            transcript.status = PARSE_FAILURE
            transcript.error = str(exc)
        except (BackendError, EmbeddingError, StateError) as exc:
            if exec_state is not None:
                graph = replace(graph, past_exp=graph.past_exp + (replace(exec_state, stop=True),))
            transcript.status = ABORTED
            transcript.error = f"{type(exc).__name__}: {exc}"
            self._close(transcript, graph, recorder, start)
            raise RunAborted(str(exc), transcript) from exc
        self._close(transcript, graph, recorder, start)
        return transcript

    def _close(self, transcript: RunTranscript, graph: GraphState, recorder: RecordingBackend, start: float):
        transcript.graph = graph
        transcript.cassette = recorder.cassette()
        transcript.timing = {"total_ms": round((self.clock() - start) * 1000.0, 3)}

    def run_step(
        self,
        exec_state: PlanExecState,
        i: int,
        plan_state: PlanState,
        agents: Agents,
        transcript: RunTranscript,
    ) -> PlanExecState:
        if exec_state.n_completed != i:
            raise StateError(f"step {i} requested but {exec_state.n_completed} steps are complete")
        cfg = self.cfg
        task = StepTaskState("search", plan_state.steps[i])
        ids: list[str] = []
        notes: list[str] = []
        try:
            if cfg.planner_enabled:
                task = agents.define_step(exec_state.original_question, plan_state, i, exec_state)
            if task.task_type == "search":
                hits = search(self.index, task.task, cfg.k, self.embedder)
                ids = [h.chunk_id for h in hits]
                transcript.retrievals.append(
                    {
                        "step": i + 1,
                        "query": task.task,
                        "k": cfg.k,
                        "hits": [{"chunk_id": h.chunk_id, "score": h.score, "rank": h.rank} for h in hits],
                    }
                )
                passages = [self.index.chunk(cid).text for cid in ids]
                if cfg.extractor_enabled:
                    note_lists = self._extract_all(agents, passages, task.task, transcript)
                else:
                    note_lists = [NoteList((p,)) for p in passages]
                notes = [n for nl in note_lists for n in nl.notes]
                out = agents.answer(task.task, note_lists, labels=[f"doc-{cid}" for cid in ids])
            else:
                history = [
                    f"Step {j}: {t.task} → Answer: {o.answer}"
                    for j, (t, o) in enumerate(zip(exec_state.step_question, exec_state.step_output), start=1)
                ]
                evidence = NoteList(tuple(history)) if history else NoteList.empty()
                notes = list(history)
                out = agents.answer(task.task, [evidence], labels=["Results of finished steps"])
        except ParseFailure as exc:
            failed = QAAnswerState.failed(f"step aborted: {exc}")
            raise _StepFailed(append_step(exec_state, task, failed, ids, notes), exc) from exc
        if cfg.rating_threshold is not None and out.success and out.rating < cfg.rating_threshold:
            out = replace(out, success=False)
        return append_step(exec_state, task, out, ids, notes)

    def _extract_all(self, agents: Agents, passages: list[str], query: str, transcript: RunTranscript):
        # per-document log buckets keep the transcript in retrieval order
        # whatever order the concurrent calls finish in
        buckets: list[list[dict]] = [[] for _ in passages]
        workers = [agents.with_sink(b.append) for b in buckets]

        def one(j: int) -> NoteList:
            return workers[j].extract(passages[j], query)

        try:
            if self.cfg.extract_workers == 1 or len(passages) <= 1:
                results = [one(j) for j in range(len(passages))]
            else:
                with ThreadPoolExecutor(max_workers=min(self.cfg.extract_workers, len(passages))) as pool:
                    results = list(pool.map(one, range(len(passages))))
        finally:
            for b in buckets:
                agents.on_call_extend(b)
        return results


def run(question: str, cfg: EngineConfig, llm: ChatBackend, index: VectorIndex, embedder: Embedder) -> GraphState:
    return Engine(cfg, llm, index, embedder).run(question)
