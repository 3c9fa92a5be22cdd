"""Acceptance gate: one check per criterion, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly:

    python tests/test_acceptance.py

Pinned tolerances: exact string / id / count equality everywhere; runtime
budgets of 5 s (golden replay through the CLI, index build included) and
2 s (retrieval exactness); unit norm within 1e-6.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import random
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.cli import main
from agentrag.errors import StateError
from agentrag.eval import QAExample, exact_match, normalize, run_benchmark
from agentrag.llm import ReplayBackend, ScriptedBackend
from agentrag.orchestrator import Engine, EngineConfig, RunTranscript
from agentrag.retrieval import Chunk, HashEmbedder, VectorIndex, build_index, passages_as_chunks, read_corpus
from agentrag.state import PlanExecState, QAAnswerState, StepTaskState, append_step
from agentrag.testing import case_dir, load_case, synthetic, write_synthetic_world

GOLDEN_BUDGET_S = 5.0
RETRIEVAL_BUDGET_S = 2.0

RESULTS: dict[int, tuple[bool, str]] = {}


def cli(*argv) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def ask_case(name: str, tmp: Path, *extra) -> tuple[int, RunTranscript, float]:
    d = case_dir(name)
    start = time.perf_counter()
    code, _, err = cli("index", d / "corpus.jsonl", tmp / f"{name}.bin", "--passages", "--embedder", f"lookup:{d / 'embeddings.json'}")
    assert code == 0, err
    code, out, err = cli("ask", load_case(name)["question"], "--config", d / "engine.ini",
                         "--index", tmp / f"{name}.bin", "--transcript", tmp / f"{name}.json", *extra)
    elapsed = time.perf_counter() - start
    return code, RunTranscript.load(tmp / f"{name}.json"), elapsed


def counts(t: RunTranscript) -> tuple[int, ...]:
    return (len(t.calls("planner")), len(t.calls("step_definer")), len(t.retrievals),
            len(t.calls("extractor")), len(t.calls("qa")))


def aligned(t: RunTranscript) -> bool:
    return all(
        len({len(e.step_question), len(e.step_output), len(e.step_docs_ids), len(e.step_notes)}) == 1
        and e.n_completed <= len(e.plan)
        for e in t.graph.past_exp
    )


# 1 -------------------------------------------------------------------------------


def criterion_1(tmp: Path) -> str:
    case = load_case("oxford")
    code, t, elapsed = ask_case("oxford", tmp)
    assert code == 0
    assert t.final_answer == "John de Vere, 15th Earl of Oxford"
    assert list(t.graph.plan) == [
        "Identify Edward De Vere, 17th Earl of Oxford's father",
        "Determine the name of Edward De Vere, 17th Earl of Oxford's paternal grandfather based on the father's name.",
    ]
    assert len(t.retrievals) == 2 and all(r["k"] == 5 and len(r["hits"]) == 5 for r in t.retrievals)
    got = [[h["chunk_id"] for h in r["hits"]] for r in t.retrievals]
    assert got == [
        ["129772", "6127861", "129773", "14010350", "12540430"],
        ["6127862", "6127858", "17870603", "12540430", "14010350"],
    ] == [s["doc_ids"] for s in case["steps"]]
    assert len(t.calls("extractor")) == 10
    assert elapsed < GOLDEN_BUDGET_S, f"{elapsed:.2f}s"
    return f"final answer exact, 2 steps, DocIDs match, 10 extractor calls, {elapsed:.2f}s < {GOLDEN_BUDGET_S:.0f}s"


# 2 -------------------------------------------------------------------------------


def criterion_2(tmp: Path) -> str:
    code, t, _ = ask_case("lodge", tmp)
    assert code == 0
    assert t.final_answer == "Sean"
    step1 = t.graph.past_exp[0].step_output[0]
    assert step1.success and "The Lodge" in step1.answer
    return f"final answer {t.final_answer!r}, step 1 answer {step1.answer!r}"


# 3 -------------------------------------------------------------------------------


def criterion_3(tmp: Path) -> str:
    code, t, _ = ask_case("century", tmp)
    assert code == 0
    assert "October 27, 1893" in t.final_answer
    notes = t.graph.past_exp[0].step_notes[1]
    assert any("1894" in n for n in notes), "fixture must carry the conflicting note"
    assert any("1893" in n for n in notes)
    return f"final answer {t.final_answer!r} with a conflicting 1894 note in the step evidence"


# 4 -------------------------------------------------------------------------------


def _oracle(vectors, ids, q, k):
    scored = sorted(
        ((math.fsum(float(a) * float(b) for a, b in zip(row, q)), cid) for row, cid in zip(vectors, ids)),
        key=lambda t: (-t[0], t[1]),
    )
    return [(cid, r) for r, (_, cid) in enumerate(scored[:k], start=1)]


def criterion_4(tmp: Path) -> str:
    # the budget covers index build + search; the pure-Python oracle is timed apart
    wall = time.perf_counter()
    rng = np.random.default_rng(2024)
    v = rng.standard_normal((1000, 48))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # deliberate duplicates: 50 rows copied elsewhere under different ids
    src = rng.choice(1000, 50, replace=False)
    dst = rng.choice(np.setdiff1d(np.arange(1000), src), 50, replace=False)
    v[dst] = v[src]
    ids = [f"chunk-{i:04d}" for i in rng.permutation(1000)]
    queries = [q / np.linalg.norm(q) for q in rng.standard_normal((100, 48))]

    engine_s = 0.0
    t0 = time.perf_counter()
    idx = VectorIndex(48, tuple(Chunk(c, "", c, 1) for c in ids), v.astype("<f4"), "acc", "0" * 64)
    got = [[(h.chunk_id, h.rank) for h in idx.search_vector(q, 5)] for q in queries]
    engine_s += time.perf_counter() - t0
    assert np.all(np.abs(np.linalg.norm(idx.vectors.astype(np.float64), axis=1) - 1) < 1e-6)
    for q, g in zip(queries, got):
        assert g == _oracle(idx.vectors, ids, q, 5)

    for s, d in zip(src, dst):
        q = idx.vectors[s].astype(np.float64)
        t0 = time.perf_counter()
        hits = idx.search_vector(q, 2)
        repeat = idx.search_vector(q, 2)
        engine_s += time.perf_counter() - t0
        assert [h.chunk_id for h in hits] == sorted([ids[s], ids[d]]) and hits[0].score == hits[1].score
        assert repeat == hits
    wall = time.perf_counter() - wall
    assert engine_s < RETRIEVAL_BUDGET_S, f"{engine_s:.2f}s"
    return (f"100/100 queries match the full-scan oracle, 50 duplicate pairs tie-broken by id, "
            f"build+search {engine_s:.3f}s < {RETRIEVAL_BUDGET_S:.0f}s (with oracle {wall:.2f}s)")


# 5 -------------------------------------------------------------------------------


def criterion_5(tmp: Path) -> str:
    rng = random.Random(55)
    k = 5
    for n in range(1, 6):
        for _ in range(3):
            syn = synthetic(n, n_docs=9, seed=rng.randrange(10**6))
            t = syn.engine(EngineConfig(k=k)).execute(syn.question)
            assert counts(t) == (1, n, n, n * k, n), (n, counts(t))

    w = write_synthetic_world(tmp / "world5", 3, seed=5)
    assert cli("index", w / "corpus.jsonl", w / "index.bin", "--passages", "--config", w / "engine.ini")[0] == 0
    q3 = [json.loads(line)["question"] for line in (w / "dataset.jsonl").read_text().splitlines()][2]  # 3 steps

    code, out, _ = cli("ask", q3, "--config", w / "engine.ini", "--no-extractor", "--json", "--transcript", tmp / "ne.json")
    t = RunTranscript.from_dict(json.loads(out))
    assert code == 0 and counts(t) == (1, 3, 3, 0, 3)
    index_texts = {json.loads(line)["id"]: json.loads(line)["text"] for line in (w / "corpus.jsonl").read_text().splitlines()}
    for call, r in zip(t.calls("qa"), t.retrievals):
        prompt = call["prompt"][-1]["content"]
        assert all(index_texts[h["chunk_id"]] in prompt for h in r["hits"])

    code, out, _ = cli("ask", q3, "--config", w / "engine.ini", "--no-planner", "--json", "--transcript", tmp / "np.json")
    t = RunTranscript.from_dict(json.loads(out))
    assert code == 0 and counts(t) == (0, 0, 1, 5, 1)
    return "n=1..5 give 1/n/n/5n/n calls; --no-extractor: 0 extractor calls, raw chunks in QA; --no-planner: 1 retrieval round"


# 6 -------------------------------------------------------------------------------


def criterion_6(tmp: Path) -> str:
    w = write_synthetic_world(tmp / "world6", 25, seed=6)
    common = ["--config", w / "engine.ini"]
    assert cli("index", w / "corpus.jsonl", w / "index.bin", "--passages", *common)[0] == 0
    cassette = tmp / "cassette.jsonl"
    code, out, _ = cli("eval", w / "dataset.jsonl", *common, "--record", cassette, "--report", tmp / "rec.json")
    assert code == 0 and out.strip() == "EM 1.000 on 25 examples"
    reports = []
    for i in range(2):
        code, out, _ = cli("eval", w / "dataset.jsonl", *common, "--backend", f"replay:{cassette}",
                           "--workers", "4", "--report", tmp / f"replay{i}.json")
        assert code == 0, out
        reports.append((tmp / f"replay{i}.json").read_bytes())
    assert reports[0] == reports[1]

    # record -> replay closure, per run
    chunks = list(passages_as_chunks(read_corpus(w / "corpus.jsonl")))
    emb = HashEmbedder()
    index = build_index(chunks, emb, build_time=0.0)
    questions = [json.loads(line)["question"] for line in (w / "dataset.jsonl").read_text().splitlines()]
    for q in questions:
        first = Engine(EngineConfig(), ScriptedBackend.from_file(w / "script.jsonl"), index, emb, clock=lambda: 0.0).execute(q)
        again = Engine(EngineConfig(), ReplayBackend.from_entries(first.cassette), index, emb, clock=lambda: 0.0).execute(q)
        assert again.graph == first.graph
    return f"two replay evals byte-identical ({len(reports[0])} bytes); closure holds for {len(questions)}/25 runs"


# 7 -------------------------------------------------------------------------------

HAND_CASES = [
    # (prediction, golds, expected EM)
    ("The Lodge", ["Lodge"], True),
    ("the lodge.", ["The Lodge"], True),
    ("A Lodge", ["lodge"], True),
    ("An Earl", ["earl"], True),
    ("SEAN", ["sean"], True),
    ("Sean!", ["Sean"], True),
    ("  Sean\t", ["Sean"], True),
    ("October 27, 1893", ["october 27 1893"], True),
    ("October 27 1894", ["October 27, 1893"], False),
    ("U.S.", ["US"], True),
    ("Theatre", ["atre"], False),  # 'the' only as a whole word
    ("Andrew", ["drew"], False),   # 'an' only as a whole word
    ("National Council of Women of Canada (NCWC)", ["national council of women of canada ncwc"], True),
    ("NCWC", ["National Council of Women of Canada", "NCWC"], True),
    ("Jessie", ["Jessie Campbell MacIver", "J. C. MacIver"], False),
    ("J. C. MacIver", ["Jessie Campbell MacIver", "J C MacIver"], True),
    ("the", [""], True),
    ("", ["a"], True),
    ("Mary de Vere", ["Mary  de  Vere"], True),
    ("Castle Hedingham, Essex", ["Castle Hedingham Essex"], True),
]


def criterion_7(tmp: Path) -> str:
    assert len(HAND_CASES) == 20
    for pred, golds, expected in HAND_CASES:
        assert exact_match(pred, golds) is expected, (pred, golds)
    assert normalize("John de Vere, 15th Earl of Oxford") == "john de vere 15th earl of oxford"
    gold = ["John de Vere, 15th Earl of Oxford"]
    assert exact_match("John de Vere, 15th Earl of Oxford", gold) is True
    assert exact_match("John de Vere, 16th Earl of Oxford", gold) is False

    rng = random.Random(77)
    ds = [QAExample(f"id{i:03d}", f"q{i}", (f"gold {i}",)) for i in range(100)]
    preds = {e.question: (e.gold_answers[0] if rng.random() < 0.5 else "other") for e in ds}

    class T:
        def __init__(self, a):
            self.final_answer, self.status = a, "answered"
            self.graph = type("G", (), {"past_exp": ()})()

    execute = lambda q: T(preds[q])  # noqa: E731
    base = run_benchmark(ds, execute, clock=lambda: 0.0)
    shuffled = ds[:]
    rng.shuffle(shuffled)
    again = run_benchmark(shuffled, execute, clock=lambda: 0.0)
    assert again.to_json() == base.to_json() and again.score == base.score
    return f"20/20 hand cases, 15th/16th Earl pair correct, shuffled-100 score {base.score:.2f} unchanged"


# 8 -------------------------------------------------------------------------------


@settings(max_examples=300, deadline=None, database=None)
@given(st.integers(1, 6), st.lists(st.tuples(st.booleans(), st.text(max_size=8)), max_size=10))
def _alignment_property(n_plan, ops):
    ex = PlanExecState("q", tuple(f"s{i}" for i in range(n_plan)))
    for i, (ok, ans) in enumerate(ops):
        before = ex.to_dict()
        try:
            ex = append_step(ex, StepTaskState("search", f"t{i}"),
                             QAAnswerState("", ans, ok and bool(ans.strip()), 1), [f"d{i}"], [ans])
        except StateError:
            assert ex.n_completed == n_plan and ex.to_dict() == before
        lengths = {len(ex.step_question), len(ex.step_output), len(ex.step_docs_ids), len(ex.step_notes)}
        assert len(lengths) == 1 and ex.n_completed <= n_plan


def criterion_8(tmp: Path) -> str:
    _alignment_property()
    w = write_synthetic_world(tmp / "world8", 3, seed=8)
    assert cli("index", w / "corpus.jsonl", w / "index.bin", "--passages", "--config", w / "engine.ini")[0] == 0
    q = [json.loads(line)["question"] for line in (w / "dataset.jsonl").read_text().splitlines()][1]  # 2 steps
    base = (w / "script.jsonl").read_text()
    boundaries = {"planner": "^Synthetic question", "step_definer": "^Plan:", "extractor": "^Passage:", "qa": "^Retrieved information:"}
    for agent, pattern in boundaries.items():
        bad = json.dumps({"match": "regex", "pattern": f"{pattern}|could not be parsed", "response": "<<garbage>>"})
        script = tmp / f"bad_{agent}.jsonl"
        script.write_text(bad + "\n" + base)
        path = tmp / f"t_{agent}.json"
        code, _, _ = cli("ask", q, "--config", w / "engine.ini", "--backend", f"scripted:{script}", "--transcript", path)
        assert code == 2, (agent, code)
        t = RunTranscript.load(path)
        assert t.status == "parse_failure" and t.final_answer == ""
        assert aligned(t)
        assert {c["agent"] for c in t.agent_calls if c["error"]} == {agent}
    return "300 random append programs keep alignment; parse failure at planner/step_definer/extractor/qa exits 2 with partial transcript"


CRITERIA = {
    1: ("golden replay, oxford case", criterion_1),
    2: ("golden replay, lodge case", criterion_2),
    3: ("golden replay, conflicting-date case", criterion_3),
    4: ("retrieval exactness", criterion_4),
    5: ("call-count law and ablations", criterion_5),
    6: ("determinism and replay closure", criterion_6),
    7: ("metric suite", criterion_7),
    8: ("state-machine safety", criterion_8),
}


def evaluate(n: int) -> tuple[bool, str]:
    title, fn = CRITERIA[n]
    with tempfile.TemporaryDirectory() as d:
        try:
            detail = fn(Path(d))
            result = (True, f"PASS criterion {n} ({title}): {detail}")
        except Exception as exc:  # noqa: BLE001 - report, then fail
            result = (False, f"FAIL criterion {n} ({title}): {type(exc).__name__}: {exc}")
    RESULTS[n] = result
    return result


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, line = evaluate(n)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        ok, line = evaluate(n)
        print(line)
        failed += not ok
    sys.exit(1 if failed else 0)
