"""Helpers shared by the test suite and the experiment scripts.

Golden cases live in ``agentrag/fixtures/<name>/``; synthetic setups build a
scripted backend for an arbitrary n-step plan over a hash-embedded corpus.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

from .llm import ScriptEntry, ScriptedBackend, write_script
from .orchestrator import Engine, EngineConfig
from .retrieval import Chunk, HashEmbedder, LookupEmbedder, VectorIndex, build_index, passages_as_chunks, read_corpus

CASES = ("oxford", "lodge", "century")


def _zero() -> float:
    return 0.0


def case_dir(name: str) -> Path:
    return Path(str(resources.files("agentrag") / "fixtures" / name))


def load_case(name: str) -> dict:
    return json.loads((case_dir(name) / "case.json").read_text(encoding="utf-8"))


def case_index(name: str) -> tuple[VectorIndex, LookupEmbedder]:
    d = case_dir(name)
    embedder = LookupEmbedder.from_file(d / "embeddings.json")
    index = build_index(list(passages_as_chunks(read_corpus(d / "corpus.jsonl"))), embedder, build_time=0.0)
    return index, embedder


def case_engine(name: str, cfg: EngineConfig | None = None, **backend_kw) -> Engine:
    index, embedder = case_index(name)
    backend = ScriptedBackend.from_file(case_dir(name) / "script.jsonl", **backend_kw)
    return Engine(cfg or EngineConfig(), backend, index, embedder, clock=_zero)


@dataclass
class Synthetic:
    question: str
    plan: list[str]
    tasks: list[str]
    answers: list[str]
    chunks: list[Chunk]
    entries: list[ScriptEntry]
    index: VectorIndex
    embedder: HashEmbedder

    def backend(self, **kw) -> ScriptedBackend:
        # fresh copies so max_uses bookkeeping never leaks between runs
        return ScriptedBackend([replace(e, uses=0) for e in self.entries], **kw)

    def engine(self, cfg: EngineConfig | None = None, **kw) -> Engine:
        return Engine(cfg or EngineConfig(), self.backend(**kw), self.index, self.embedder, clock=_zero)


_WORDS = ["amber", "basalt", "cedar", "delta", "ember", "fjord", "granite", "harbor", "iris", "juniper"]


def synthetic_chunks(n_docs: int, seed: int = 0, tag: str = "q") -> list[Chunk]:
    rng = random.Random(seed)
    out = []
    for i in range(n_docs):
        text = f"Passage {i} ({tag}) mentions {rng.choice(_WORDS)} and {rng.choice(_WORDS)}."
        out.append(Chunk(f"d{i:03d}", f"Doc {i}", text, len(text.split())))
    return out


def extractor_entries(chunks: list[Chunk]) -> list[ScriptEntry]:
    # each note names its source passage so note order is observable
    return [
        ScriptEntry("regex", "^" + re.escape(f"Passage: {c.text}\n"), json.dumps([f"note from {c.id}"]))
        for c in chunks
    ]


def question_entries(question: str, plan: list[str], tasks: list[str], answers: list[str]) -> list[ScriptEntry]:
    """Planner, step definer and QA entries for one all-search question."""
    entries = [ScriptEntry("exact", question, json.dumps({"analysis": "Split into hops.", "step": plan}))]
    for step, task in zip(plan, tasks):
        entries.append(
            ScriptEntry("substring", f"Current step: {step}\n", json.dumps({"type": "search", "task": task}))
        )
    for task, ans in zip(tasks, answers):
        entries.append(
            ScriptEntry(
                "regex",
                r"(?s)^Retrieved information:\n.*\nQuestion:\n" + re.escape(task) + r"\Z",
                json.dumps({"analysis": "From the notes.", "answer": ans, "success": "yes", "rating": 4}),
            )
        )
    # no-planner runs ask the original question directly
    entries.append(
        ScriptEntry(
            "regex",
            r"(?s)^Retrieved information:\n.*\nQuestion:\n" + re.escape(question) + r"\Z",
            json.dumps({"analysis": "Single round.", "answer": answers[-1], "success": "yes", "rating": 3}),
        )
    )
    return entries


def _question(n_steps: int, label: str):
    question = f"Synthetic question {label} with {n_steps} hops?"
    plan = [f"Resolve hop {j + 1} of {label}" for j in range(n_steps)]
    tasks = [f"What is fact {j + 1} for {label}?" for j in range(n_steps)]
    answers = [f"answer {j + 1} of {label}" for j in range(n_steps)]
    return question, plan, tasks, answers


def synthetic(n_steps: int, n_docs: int = 12, seed: int = 0, tag: str = "q") -> Synthetic:
    """A scripted world where every step is a search with a known answer."""
    chunks = synthetic_chunks(n_docs, seed, tag)
    embedder = HashEmbedder()
    index = build_index(chunks, embedder, build_time=0.0)
    question, plan, tasks, answers = _question(n_steps, f"{tag}-{seed}")
    entries = question_entries(question, plan, tasks, answers) + extractor_entries(chunks)
    return Synthetic(question, plan, tasks, answers, chunks, entries, index, embedder)


def write_synthetic_world(
    path: str | Path, n_examples: int, *, n_docs: int = 12, seed: int = 0, wrong: Iterable[int] = ()
) -> Path:
    """Corpus, script, dataset and config for a batch of scripted questions.

    Example ``i`` has ``1 + i % 3`` steps.  Indices in ``wrong`` get a gold
    answer the script never produces.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    wrong = set(wrong)
    rng = random.Random(seed)
    chunks = synthetic_chunks(n_docs, seed, tag="world")
    entries = extractor_entries(chunks)
    with open(path / "dataset.jsonl", "w", encoding="utf-8") as ds:
        for i in range(n_examples):
            question, plan, tasks, answers = _question(1 + i % 3, f"ex{i:03d}-{rng.randrange(10**6)}")
            entries = question_entries(question, plan, tasks, answers) + entries
            gold = "never produced" if i in wrong else answers[-1]
            ds.write(json.dumps({"id": f"ex{i:03d}", "question": question, "answers": [gold]}) + "\n")
    with open(path / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps({"id": c.id, "title": c.title, "text": c.text}) + "\n")
    write_script(path / "script.jsonl", entries)
    (path / "engine.ini").write_text(
        "[llm_backend]\nbackend = scripted:script.jsonl\n\n[retrieval]\nindex = index.bin\nembedder = test\n",
        encoding="utf-8",
    )
    return path
