"""Exact Match / label Accuracy and batch benchmark reports.

EM uses SQuAD-style normalisation (lowercase, drop punctuation, drop the
articles a/an/the, collapse whitespace).  Absolute EM numbers depend on this
choice, so compare scores only between runs that share it.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import AgentRagError, RunAborted
from .state import dumps

logger = logging.getLogger(__name__)

LABELS = ("SUPPORTS", "REFUTES")
_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize(text: str) -> str:
    text = text.lower().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, golds: Sequence[str]) -> bool:
    if not golds:
        raise ValueError("need at least one gold answer")
    pred = normalize(prediction)
    return any(pred == normalize(g) for g in golds)


def label_accuracy(prediction: str, gold_label: str) -> bool:
    gold = gold_label.strip().upper()
    if gold not in LABELS:
        raise ValueError(f"gold label must be one of {LABELS}, got {gold_label!r}")
    pred = prediction.strip().upper()
    if pred not in LABELS:
        logger.warning("unknown predicted label %r counted as wrong", prediction)
        return False
    return pred == gold


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    gold_answers: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        if not self.gold_answers:
            raise ValueError(f"example {self.id!r} has no gold answers")


def load_dataset(path: str | Path) -> list[QAExample]:
    """JSON Lines ``{id, question | claim, answers: [...]}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                question = rec.get("question", rec.get("claim"))
                answers = rec["answers"]
                if isinstance(answers, str):
                    answers = [answers]
                out.append(QAExample(str(rec["id"]), question, tuple(answers)))
            except (ValueError, KeyError, TypeError) as exc:
                raise AgentRagError(f"{path}, line {lineno}: bad example ({exc})") from None
    return out


@dataclass
class EvalReport:
    dataset: str
    metric: str
    records: list[dict] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def matched(self) -> int:
        return sum(1 for r in self.records if r["matched"])

    @property
    def score(self) -> float:
        return self.matched / self.n if self.n else 0.0

    @property
    def metric_label(self) -> str:
        return "EM" if self.metric == "em" else "Acc"

    def to_dict(self, include_timing: bool = False) -> dict:
        keep = ("id", "prediction", "matched", "status", "steps_used") + (("latency",) if include_timing else ())
        return {
            "dataset": self.dataset,
            "metric": self.metric_label,
            "n": self.n,
            "matched": self.matched,
            "score": self.score,
            "records": [{k: r[k] for k in keep} for r in self.records],
        }

    def to_json(self, include_timing: bool = False) -> str:
        return dumps(self.to_dict(include_timing))

    def summary_line(self) -> str:
        return f"{self.metric_label} {self.score:.3f} on {self.n} examples"

    def summary_table(self) -> str:
        rows = [("dataset", "metric", "n", "matched", "score"),
                (self.dataset, self.metric_label, str(self.n), str(self.matched), f"{self.score:.3f}")]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"

    def bar_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "metric", "score"])
        w.writerow([self.dataset, self.metric_label, f"{self.score * 100:.1f}"])
        return buf.getvalue()


def run_benchmark(
    dataset: Iterable[QAExample],
    execute: Callable[[str], "object"],
    *,
    metric: str = "em",
    name: str = "dataset",
    workers: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> EvalReport:
    """Run ``execute(question) -> RunTranscript`` once per example.

    Failures are scored as unmatched and never stop the batch.  Records are
    sorted by example id so the report does not depend on input order.
    """
    examples = list(dataset)
    if not examples:
        raise ValueError("dataset is empty")
    if metric not in ("em", "acc"):
        raise ValueError(f"unknown metric {metric!r}")
    ids = [ex.id for ex in examples]
    if len(set(ids)) != len(ids):
        raise ValueError("example ids must be unique")

    def one(ex: QAExample) -> dict:
        start = clock()
        prediction, status, steps = "", "error", 0
        try:
            transcript = execute(ex.question)
            prediction, status = transcript.final_answer, transcript.status
        except RunAborted as exc:
            transcript = exc.transcript
            status = "aborted"
        except Exception as exc:  # noqa: BLE001 - one bad example must not sink the batch
            logger.warning("example %s failed: %s", ex.id, exc)
            transcript = None
        if transcript is not None:
            steps = sum(e.n_completed for e in transcript.graph.past_exp)
        if metric == "em":
            matched = bool(prediction) and exact_match(prediction, ex.gold_answers)
        else:
            matched = label_accuracy(prediction, ex.gold_answers[0])
        return {
            "id": ex.id,
            "prediction": prediction,
            "matched": matched,
            "status": status,
            "steps_used": steps,
            "latency": round(clock() - start, 6),
        }

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, examples))
    else:
        records = [one(ex) for ex in examples]
    records.sort(key=lambda r: r["id"])
    return EvalReport(dataset=name, metric=metric, records=records)
