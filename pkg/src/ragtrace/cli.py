"""Operator entry points: ingest, eval, project, serve, export.

Every subcommand is a thin veneer over the module operations. Progress is
reported as JSON events on stderr (one object per line: {event, pct, msg});
exit codes: 0 success, 1 usage error, 2 runtime error.

Set RAGTRACE_FIXED_CLOCK to an ISO timestamp to pin created_at/started_at
fields, which makes artifacts byte-reproducible (used by the golden tests).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .core import MetricWeights, Question, canonical_json, validate_weights
from .errors import RagTraceError
from .experiment import RunStore, SamplingConfig, execute_run, radar_data
from .gateway import make_gateway
from .ingest import ChunkingConfig, ingest_documents, load_corpus, read_documents_jsonl, save_corpus
from .projection import fit_projection, grid_density, projection_export
from .retrieval import RetrievalStrategy

USAGE_ERROR = 1
RUNTIME_ERROR = 2


def emit(event: str, pct: int, msg: str) -> None:
    print(json.dumps({"event": event, "pct": pct, "msg": msg}), file=sys.stderr, flush=True)


def fixed_clock():
    stamp = os.environ.get("RAGTRACE_FIXED_CLOCK")
    if stamp:
        return lambda: stamp
    return None


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:
        try:
            import tomli as tomllib  # type: ignore
        except ModuleNotFoundError as exc:
            raise RagTraceError("TOML config requires Python 3.11+ or the tomli package; use JSON") from exc
    return tomllib.loads(text)


def _apply_config(args: argparse.Namespace) -> None:
    """Config file values fill in flags the command line left at default."""
    if not getattr(args, "config", None):
        return
    config = _load_config_file(args.config)
    sub = args.subparser
    for key, value in config.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if sub.get_default(attr) == getattr(args, attr):
            setattr(args, attr, value)


def _read_questions(path: str) -> list[Question]:
    rows = [
        json.loads(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return [Question.from_json_dict(r) for r in rows]


def _read_weights(path: Optional[str]) -> MetricWeights:
    if not path:
        return validate_weights(MetricWeights())
    return validate_weights(MetricWeights.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8"))))


def cmd_ingest(args, parser) -> int:
    emit("ingest.start", 0, f"reading {args.docs}")
    documents = read_documents_jsonl(args.docs)
    cfg = ChunkingConfig(max_tokens=args.max_tokens, overlap_tokens=args.overlap, split_on=args.split_on)
    gateway = make_gateway(args.backend)
    emit("ingest.embed", 30, f"chunking and embedding {len(documents)} documents")
    corpus = ingest_documents(documents, gateway, cfg, clock=fixed_clock())
    emit("ingest.save", 80, f"writing corpus to {args.out}")
    save_corpus(corpus, args.out)
    emit("ingest.done", 100, f"{len(corpus)} chunks, dimension {corpus.dimension}")
    print(canonical_json({"chunks": len(corpus), "dimension": corpus.dimension, "out": str(args.out)}))
    return 0


def cmd_eval(args, parser) -> int:
    emit("eval.start", 0, f"loading corpus {args.corpus}")
    corpus = load_corpus(args.corpus)
    questions = _read_questions(args.questions)
    weights = _read_weights(args.weights)
    strategy = RetrievalStrategy(kind=args.strategy, k=args.k)
    cfg = SamplingConfig(
        diversity=args.diversity,
        num_chunks=args.k,
        num_questions=max(1, len(questions)),
        selection="random",
    )
    emit("eval.run", 20, f"evaluating {len(questions)} questions with strategy {args.strategy}")
    run = execute_run(
        questions, corpus, strategy, cfg, make_gateway(args.backend), weights,
        label=args.label, clock=fixed_clock(),
    )
    payload = canonical_json(run.to_json_dict())
    Path(args.out).write_text(payload + "\n", encoding="utf-8")
    if args.store:
        RunStore(args.store).persist_run(run)
    errors = sum(1 for r in run.records if r.error)
    emit("eval.done", 100, f"run {run.run_id}: {len(run.records)} records, {errors} errors")
    print(canonical_json({"run_id": run.run_id, "records": len(run.records), "errors": errors}))
    return 0


def cmd_project(args, parser) -> int:
    emit("project.start", 0, f"loading corpus {args.corpus}")
    corpus = load_corpus(args.corpus)
    emit("project.fit", 20, f"fitting {len(corpus)} points (perplexity {args.perplexity})")
    state = fit_projection(corpus, perplexity=args.perplexity, iterations=args.iterations, seed=args.seed)
    grid = grid_density(state, args.resolution)
    Path(args.out).write_text(canonical_json(projection_export(state, grid)) + "\n", encoding="utf-8")
    emit("project.done", 100, f"final KL {state.kl_history[-1]:.4f}")
    print(canonical_json({"points": len(state.base_points), "kl_final": state.kl_history[-1], "out": str(args.out)}))
    return 0


def cmd_serve(args, parser) -> int:
    import uvicorn

    from .service import build_state, create_app

    state = build_state(
        backend=args.backend,
        corpus_dir=args.corpus,
        questions_path=args.questions,
        store_dir=args.store,
        lexicon_path=args.lexicon,
    )
    app = create_app(state)
    emit("serve.start", 0, f"listening on :{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args, parser) -> int:
    store = RunStore(args.store)
    run = store.load_run(args.run)
    if args.format == "json":
        out = canonical_json(run.to_json_dict())
    else:
        import csv
        import io

        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(
            ["question_id", "retrieval_failure", "prompt_fragility", "generation_anomaly",
             "standard_anomaly", "correctness", "topic_relevance", "error"]
        )
        for record in run.records:
            m = record.metrics
            writer.writerow(
                [record.question_id, m.retrieval_failure, m.prompt_fragility, m.generation_anomaly,
                 m.standard_anomaly, m.correctness, m.topic_relevance, record.error or ""]
            )
        out = buffer.getvalue().rstrip("\n")
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    else:
        print(out)
    return 0


def cmd_radar(args, parser) -> int:
    store = RunStore(args.store)
    runs = [store.load_run(run_id) for run_id in args.runs]
    out = canonical_json(radar_data(runs))
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    else:
        print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragtrace", description="RAG workflow diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="chunk, embed and index a document set")
    p.add_argument("--docs", required=True, help="JSONL of {doc_id, text}")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--max-tokens", type=int, default=256, dest="max_tokens")
    p.add_argument("--overlap", type=int, default=32)
    p.add_argument("--split-on", default="paragraph_then_window", choices=["paragraph_then_window", "fixed_window"], dest="split_on")
    p.add_argument("--backend", default="mock", choices=["mock", "openai_compatible"])
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_ingest, subparser=p)

    p = sub.add_parser("eval", help="evaluate a question set against a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--strategy", default="plain", choices=["plain", "standard", "hyde"])
    p.add_argument("--out", required=True, help="run JSON output path")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--diversity", type=float, default=0.0)
    p.add_argument("--weights", default=None, help="JSON file of metric weights")
    p.add_argument("--store", default=None, help="run store directory to persist into")
    p.add_argument("--label", default="original")
    p.add_argument("--backend", default="mock", choices=["mock", "openai_compatible"])
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_eval, subparser=p)

    p = sub.add_parser("project", help="fit the 2-D projection and export it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=750)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_project, subparser=p)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--corpus", default=None, help="persisted corpus directory")
    p.add_argument("--questions", default=None)
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--backend", default="mock", choices=["mock", "openai_compatible"])
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve, subparser=p)

    p = sub.add_parser("export", help="export a persisted run")
    p.add_argument("--run", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export, subparser=p)

    p = sub.add_parser("radar", help="radar comparison data for persisted runs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_radar, subparser=p)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        _apply_config(args)
        return args.func(args, parser)
    except RagTraceError as exc:
        emit("error", 100, str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as exc:
        emit("error", 100, str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
