"""Command-line entry point: ``agentrag {index,ask,eval,replay}``.

Exit codes: 0 answered / passed, 1 usage or config error, 2 runtime abort
(backend outage, terminal parse failure, replay mismatch), 3 the run
finished without an answer.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from .config import CliConfig, make_backend, make_embedder, merge, read_config_file, resolve_path
from .errors import AgentRagError, BuildError, CassetteMiss, ConfigError, CorpusFormatError, RunAborted
from .eval import load_dataset, run_benchmark
from .llm import ReplayBackend
from .orchestrator import ANSWERED, UNANSWERED, Engine, EngineConfig, RunTranscript, config_hash
from .retrieval import atomic_write, build_index, chunk_corpus, load_index, passages_as_chunks, read_corpus, save_index

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_UNANSWERED = 0, 1, 2, 3

logger = logging.getLogger("agentrag")


def _zero_clock() -> float:
    return 0.0


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("engine")
    g.add_argument("--config", help="INI config file")
    g.add_argument("--k", type=int)
    g.add_argument("--max-plan-steps", type=int)
    g.add_argument("--planner", dest="planner_enabled", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--extractor", dest="extractor_enabled", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--max-parse-repairs", type=int)
    g.add_argument("--max-replans", type=int)
    g.add_argument("--model-id")
    g.add_argument("--temperature", type=float)
    g.add_argument("--max-tokens", type=int)
    g.add_argument("--rating-threshold", type=int)
    g.add_argument("--extract-workers", type=int)
    g.add_argument("--backend", help="remote | scripted:<file> | replay:<cassette>")
    g.add_argument("--url", help="base URL of the chat endpoint")
    g.add_argument("--record", help="also write a prompt-hash cassette here")
    g.add_argument("--max-in-flight", type=int)
    g.add_argument("--index", help="index file")
    g.add_argument("--embedder", help="test[:<dim>] | lookup:<file> | remote")
    g.add_argument("--embed-url")
    g.add_argument("--embed-model")
    g.add_argument("--timing", choices=("auto", "wall", "off"))
    g.add_argument("--transcript-dir")


_FLAG_KEYS = (
    EngineConfig.field_names()
    + ["backend", "url", "record", "max_in_flight", "index", "embedder", "embed_url", "embed_model",
       "chunk_words", "overlap_words", "timing", "transcript_dir"]
)


def _flag_values(args: argparse.Namespace) -> dict:
    values = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    cwd = Path.cwd()
    for key in ("record", "index", "transcript_dir"):
        if values.get(key):
            values[key] = resolve_path(values[key], cwd)
    for key, prefixes in (("backend", ("scripted", "replay")), ("embedder", ("lookup",))):
        v = values.get(key)
        if v and v.split(":", 1)[0] in prefixes and ":" in v:
            kind, rest = v.split(":", 1)
            values[key] = f"{kind}:{resolve_path(rest, cwd)}"
    return values


def load_cli_config(args: argparse.Namespace) -> CliConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    return merge(file_values, _flag_values(args))


def _engine(cfg: CliConfig, backend=None) -> Engine:
    if not cfg.index:
        raise ConfigError("no index configured (use --index or [retrieval] index)")
    try:
        index = load_index(cfg.index)
    except OSError as exc:
        raise ConfigError(f"cannot read index {cfg.index}: {exc}") from None
    embedder = make_embedder(cfg)
    return Engine(
        cfg.engine,
        backend if backend is not None else make_backend(cfg),
        index,
        embedder,
        clock=_zero_clock if cfg.deterministic else time.perf_counter,
        sources={"index": cfg.index, "embedder": cfg.embedder},
    )


# --------------------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    cfg = load_cli_config(args)
    chunk_words = args.chunk_words if args.chunk_words is not None else cfg.chunk_words
    overlap = args.overlap if args.overlap is not None else cfg.overlap_words
    try:
        docs = read_corpus(args.corpus)
        chunks = list(passages_as_chunks(docs) if args.passages else chunk_corpus(docs, chunk_words, overlap))
        index = build_index(chunks, make_embedder(cfg))
        nbytes = save_index(index, args.index_path)
    except (CorpusFormatError, BuildError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"chunks: {index.count}")
    print(f"dim: {index.dim}")
    print(f"bytes: {nbytes}")
    print(f"embedder: {index.embedder_id}")
    print(f"corpus_hash: {index.corpus_hash}")
    return EXIT_OK


def _transcript_path(cfg: CliConfig, question: str, explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    name = hashlib.sha256(question.encode("utf-8")).hexdigest()[:16]
    return Path(cfg.transcript_dir) / f"{name}.json"


def print_run(t: RunTranscript, out=None) -> None:
    out = out or sys.stdout
    g = t.graph
    print(f"question: {g.original_question}", file=out)
    print(f"plan: {json.dumps(list(g.plan), ensure_ascii=False)}", file=out)
    for ex in g.past_exp:
        for i, (task, res, ids) in enumerate(zip(ex.step_question, ex.step_output, ex.step_docs_ids), start=1):
            step = ex.plan[i - 1]
            print(f"step {i}: {step}", file=out)
            print(f"  task ({task.task_type}): {task.task}", file=out)
            if ids:
                print(f"  retrieved: {', '.join(ids)}", file=out)
            print(f"  answer: {res.answer if res.success else '(no answer)'}", file=out)
    print(f"final answer: {g.final_answer or ''}", file=out)
    print(f"status: {t.status}", file=out)


def cmd_ask(args: argparse.Namespace) -> int:
    cfg = load_cli_config(args)
    engine = _engine(cfg)
    path = _transcript_path(cfg, args.question, args.transcript)
    try:
        transcript = engine.execute(args.question)
    except RunAborted as exc:
        if exc.transcript is not None:
            exc.transcript.write(path)
        print(f"run aborted: {exc}", file=sys.stderr)
        print(f"partial transcript: {path}", file=sys.stderr)
        return EXIT_ABORT
    transcript.write(path)
    if args.json:
        sys.stdout.write(transcript.to_json())
    else:
        print_run(transcript)
        print(f"transcript: {path}")
    if transcript.status == ANSWERED:
        return EXIT_OK
    if transcript.status == UNANSWERED:
        return EXIT_UNANSWERED
    print(f"run ended early: {transcript.error}", file=sys.stderr)
    return EXIT_ABORT


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_cli_config(args)
    try:
        dataset = load_dataset(args.dataset)
    except (OSError, AgentRagError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not dataset:
        print(f"error: dataset {args.dataset} is empty", file=sys.stderr)
        return EXIT_USAGE
    engine = _engine(cfg)
    report = run_benchmark(
        dataset,
        engine.execute,
        metric=args.metric,
        name=args.name or Path(args.dataset).stem,
        workers=args.workers,
        clock=_zero_clock if cfg.deterministic else time.perf_counter,
    )
    report_path = Path(args.report)
    atomic_write(report_path, report.to_json().encode("utf-8"))
    stem = report_path.with_suffix("")
    atomic_write(Path(f"{stem}.summary.txt"), report.summary_table().encode("utf-8"))
    atomic_write(Path(f"{stem}.bars.csv"), report.bar_csv().encode("utf-8"))
    timings = "".join(json.dumps({"id": r["id"], "latency": r["latency"]}) + "\n" for r in report.records)
    atomic_write(Path(f"{stem}.timing.jsonl"), timings.encode("utf-8"))
    print(report.summary_line())
    return EXIT_OK


def _compare(label: str, stored, regenerated) -> bool:
    ok = stored == regenerated
    print(f"{'PASS' if ok else 'FAIL'} {label}")
    return ok


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        stored = RunTranscript.load(args.transcript_path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read transcript: {exc}", file=sys.stderr)
        return EXIT_USAGE
    file_values = read_config_file(args.config) if args.config else {}
    # start from the recorded run, let file and flags override it
    base = {k: v for k, v in stored.config.items() if k in EngineConfig.field_names()}
    base.update(index=stored.sources.get("index"), embedder=stored.sources.get("embedder", "test"))
    flags = _flag_values(args)
    flags["backend"] = None
    cfg = merge({**base, **file_values, "backend": "replay:-", "timing": "off"}, flags)

    engine = _engine(cfg, backend=ReplayBackend.from_entries(stored.cassette))
    ok = _compare("config_hash", stored.config_hash, config_hash(stored.config))
    ok = _compare("config", stored.config_hash, config_hash(engine.config_dict())) and ok
    try:
        regenerated = engine.execute(stored.graph.original_question)
    except RunAborted as exc:
        cause = exc.__cause__
        if isinstance(cause, CassetteMiss):
            print(f"FAIL cassette: no entry for prompt {cause.prompt_sha256}")
        else:
            print(f"FAIL replay aborted: {exc}")
        return EXIT_ABORT
    g0, g1 = stored.graph.to_dict(), regenerated.graph.to_dict()
    for key in ("original_question", "plan", "past_exp", "final_answer"):
        ok = _compare(key, g0[key], g1[key]) and ok
    return EXIT_OK if ok else EXIT_ABORT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentrag", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="chunk, embed and index a JSON Lines corpus")
    p.add_argument("corpus")
    p.add_argument("index_path")
    p.add_argument("--chunk-words", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--passages", action="store_true", help="records are already passages; keep their ids")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("question")
    p.add_argument("--json", action="store_true", help="print the transcript JSON instead of a summary")
    p.add_argument("--transcript", help="transcript output path")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="run a benchmark dataset")
    p.add_argument("dataset")
    p.add_argument("--metric", choices=("em", "acc"), default="em")
    p.add_argument("--report", default="report.json")
    p.add_argument("--name")
    p.add_argument("--workers", type=int, default=1)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-run a transcript from its recorded responses and diff the result")
    p.add_argument("transcript_path")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    for attr in ("chunk_words", "overlap_words"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
