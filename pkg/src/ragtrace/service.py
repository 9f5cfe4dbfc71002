"""HTTP JSON API binding the diagnostics engine for the UI and external tools.

Owns application state (one corpus, one projection, question set, run store,
lexicon, weights). Long jobs (projection fits, experiment runs) execute off
the request path; POST returns a job id and the GET side answers 202 until
the job lands.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import FAILURE_TYPES, MetricWeights, Question, validate_weights
from .diagnostics import EvaluationRecord
from .errors import (
    MissingPriorRecords,
    NotFound,
    RagTraceError,
    StateNotReady,
    ThetaOutOfRange,
    WeightSumViolation,
)
from .evidence import EntityLexicon, annotate_answer, build_evidence_graph
from .experiment import RunStore, SamplingConfig, execute_run, radar_data
from .gateway import Gateway, make_gateway
from .ingest import Corpus, ingest_documents, load_corpus, read_documents_jsonl
from .projection import (
    GridDensity,
    ProjectionState,
    cell_topics,
    fit_projection,
    grid_cell_of,
    grid_density,
    project_incremental,
)
from .retrieval import RetrievalStrategy, build_chunk_relink, classify_relevance, retrieve

DEFAULT_PORT = 8642

SEARCH_PRESETS = ("similarity", "high_hallucination", "improvement_potential")


# ---------------------------------------------------------------------------
# Jobs
# ---------------------------------------------------------------------------

class JobRegistry:
    def __init__(self, workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    def submit(self, fn) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = {"status": "queued", "error": None}

        def run():
            with self._lock:
                self._jobs[job_id]["status"] = "running"
            try:
                fn()
            except Exception as exc:
                with self._lock:
                    self._jobs[job_id].update(status="failed", error=f"{type(exc).__name__}: {exc}")
            else:
                with self._lock:
                    self._jobs[job_id]["status"] = "done"

        self._pool.submit(run)
        return job_id

    def status(self, job_id: str) -> dict:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFound(f"job {job_id!r} not found")
            return {"job_id": job_id, **self._jobs[job_id]}

    def any_running(self, kind_map: dict[str, str], kind: str) -> bool:
        with self._lock:
            return any(
                kind_map.get(jid) == kind and j["status"] in ("queued", "running")
                for jid, j in self._jobs.items()
            )


@dataclass
class AppState:
    gateway: Gateway
    store: RunStore
    lexicon: EntityLexicon
    weights: MetricWeights = field(default_factory=MetricWeights)
    corpus: Optional[Corpus] = None
    projection: Optional[ProjectionState] = None
    projection_corpus_hash: Optional[str] = None
    grid: Optional[GridDensity] = None
    questions: list[Question] = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock)
    jobs: JobRegistry = field(default_factory=JobRegistry)
    job_kinds: dict[str, str] = field(default_factory=dict)
    position_cache: dict[str, tuple[float, float]] = field(default_factory=dict)

    def question_by_id(self, qid: str) -> Question:
        for q in self.questions:
            if q.id == qid:
                return q
        raise NotFound(f"question {qid!r} not found")

    def require_corpus(self) -> Corpus:
        with self.lock:
            if self.corpus is None:
                raise StateNotReady("no corpus loaded")
            return self.corpus

    def require_projection(self) -> ProjectionState:
        with self.lock:
            corpus = self.require_corpus()
            if self.projection is None:
                raise StateNotReady("projection not fitted")
            if self.projection_corpus_hash != corpus.content_hash():
                raise StateNotReady("projection is stale; refit against the current corpus")
            return self.projection

    def latest_records(self) -> dict[str, EvaluationRecord]:
        """Latest record per question across all persisted runs."""
        merged: dict[str, EvaluationRecord] = {}
        for descriptor in self.store.list_runs():
            run = self.store.load_run(descriptor["run_id"])
            for record in run.records:
                merged[record.question_id] = record
        return merged

    def position_of(self, key: str, text: str) -> Optional[tuple[float, float]]:
        with self.lock:
            if self.projection is None:
                return None
            cached = self.position_cache.get(key)
            if cached is not None:
                return cached
        vec = self.gateway.embed([text])[0]
        placed = project_incremental(self.projection, [vec])[0]
        with self.lock:
            self.position_cache[key] = placed
        return placed


# ---------------------------------------------------------------------------
# Request models
# ---------------------------------------------------------------------------

class CorpusRequest(BaseModel):
    path: Optional[str] = None
    documents: Optional[list[dict]] = None
    max_tokens: int = 256
    overlap_tokens: int = 32
    split_on: str = "paragraph_then_window"


class QuestionsRequest(BaseModel):
    path: Optional[str] = None
    questions: Optional[list[dict]] = None


class ProjectionRequest(BaseModel):
    perplexity: float = 30.0
    iterations: int = 750
    seed: int = 0


class SearchRequest(BaseModel):
    query: str
    preset: str = "similarity"
    limit: int = 10
    weight_overrides: Optional[dict[str, float]] = None


class ExperimentRequest(BaseModel):
    config: dict
    strategy: dict
    label: str = "original"
    before_run_id: Optional[str] = None
    seed: int = 0


def _error_response(status: int, code: str, message: str, detail: Any = None) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message, "detail": detail})


def _http_status_for(exc: RagTraceError) -> int:
    if isinstance(exc, NotFound):
        return 404
    if isinstance(exc, (StateNotReady, MissingPriorRecords)):
        return 409
    if isinstance(exc, (WeightSumViolation, ThetaOutOfRange)):
        return 400
    return 500


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="ragtrace", openapi_url="/api/spec")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.ragtrace = state

    @app.exception_handler(RagTraceError)
    async def ragtrace_error_handler(request: Request, exc: RagTraceError):
        return _error_response(_http_status_for(exc), exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return _error_response(400, "validation_error", "invalid request body", exc.errors())

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return _error_response(400, "validation_error", str(exc))

    # -- corpus and questions ---------------------------------------------

    @app.post("/api/corpus")
    def post_corpus(body: CorpusRequest):
        from .ingest import ChunkingConfig

        if body.path:
            path = Path(body.path)
            if path.is_dir():
                corpus = load_corpus(path)
            else:
                cfg = ChunkingConfig(body.max_tokens, body.overlap_tokens, body.split_on)
                corpus = ingest_documents(read_documents_jsonl(path), state.gateway, cfg)
        elif body.documents:
            docs = [(d["doc_id"], d["text"]) for d in body.documents]
            cfg = ChunkingConfig(body.max_tokens, body.overlap_tokens, body.split_on)
            corpus = ingest_documents(docs, state.gateway, cfg)
        else:
            raise ValueError("corpus request needs a path or inline documents")
        with state.lock:
            state.corpus = corpus
            state.projection = None
            state.projection_corpus_hash = None
            state.grid = None
            state.position_cache.clear()
        return _corpus_summary(corpus)

    @app.post("/api/questions")
    def post_questions(body: QuestionsRequest):
        rows: list[dict]
        if body.path:
            import json as _json

            rows = []
            for line in Path(body.path).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rows.append(_json.loads(line))
        elif body.questions is not None:
            rows = body.questions
        else:
            raise ValueError("questions request needs a path or inline questions")
        questions = []
        duplicates = []
        seen = set()
        missing_truth = 0
        unresolved: list[str] = []
        corpus = state.corpus
        for row in rows:
            q = Question.from_json_dict(row)
            if q.id in seen:
                duplicates.append(q.id)
                continue
            seen.add(q.id)
            if q.ground_truth is None:
                missing_truth += 1
            if q.gold_chunk_ids and corpus is not None:
                unresolved.extend(cid for cid in sorted(q.gold_chunk_ids) if cid not in corpus)
            questions.append(q)
        with state.lock:
            state.questions = questions
        return {
            "count": len(questions),
            "report": {
                "missing_ground_truth": missing_truth,
                "unresolved_gold_ids": unresolved,
                "duplicate_ids": duplicates,
            },
        }

    # -- projection ---------------------------------------------------------

    @app.post("/api/projection")
    def post_projection(body: ProjectionRequest):
        corpus = state.require_corpus()

        def job():
            fitted = fit_projection(corpus, body.perplexity, body.iterations, body.seed)
            grid = grid_density(fitted, 200)
            with state.lock:
                state.projection = fitted
                state.projection_corpus_hash = corpus.content_hash()
                state.grid = grid
                state.position_cache.clear()

        job_id = state.jobs.submit(job)
        state.job_kinds[job_id] = "projection"
        return JSONResponse(status_code=202, content={"job_id": job_id})

    @app.get("/api/projection")
    def get_projection():
        with state.lock:
            corpus_present = state.corpus is not None
            fitted = state.projection
            grid = state.grid
        if not corpus_present:
            raise StateNotReady("no corpus loaded")
        if fitted is None:
            if state.jobs.any_running(state.job_kinds, "projection"):
                return JSONResponse(status_code=202, content={"status": "fitting"})
            raise StateNotReady("projection not fitted")
        return {
            "points": fitted.points_json(),
            "grid": (grid or grid_density(fitted, 200)).to_json_dict(),
            "kl_history": list(fitted.kl_history),
        }

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return state.jobs.status(job_id)

    @app.get("/api/cells/{i}/{j}/topics")
    def get_cell_topics(i: int, j: int):
        fitted = state.require_projection()
        corpus = state.require_corpus()
        with state.lock:
            grid = state.grid or grid_density(fitted, 200)
        resolution = grid.resolution
        if not (0 <= i < resolution and 0 <= j < resolution):
            raise NotFound(f"cell ({i},{j}) outside the {resolution}x{resolution} grid")
        texts = []
        for (cid, x, y) in fitted.base_points:
            if grid_cell_of(fitted, x, y, resolution) == (i, j):
                chunk = corpus.get(cid)
                if chunk is not None:
                    texts.append(chunk.text)
        if not texts:
            return {"cell": {"i": i, "j": j}, "keywords": []}
        return cell_topics(texts, [], state.gateway, cell=(i, j)).to_json_dict()

    # -- search and question details ----------------------------------------

    @app.post("/api/search")
    def post_search(body: SearchRequest):
        if body.preset not in SEARCH_PRESETS:
            raise ValueError(f"unknown preset {body.preset!r}; expected one of {SEARCH_PRESETS}")
        if not body.query:
            raise ValueError("query must be non-empty")
        state.require_corpus()
        with state.lock:
            questions = list(state.questions)
        if not questions:
            raise StateNotReady("no question set uploaded")
        records = state.latest_records()
        if body.preset in ("high_hallucination", "improvement_potential") and not records:
            raise MissingPriorRecords(f"preset {body.preset!r} needs prior evaluation records")

        blend = {"similarity": 1.0, "hallucination": 0.0, "improvement": 0.0}
        if body.preset == "high_hallucination":
            blend = {"similarity": 0.5, "hallucination": 0.5, "improvement": 0.0}
        elif body.preset == "improvement_potential":
            blend = {"similarity": 0.5, "hallucination": 0.0, "improvement": 0.5}
        if body.weight_overrides:
            unknown = set(body.weight_overrides) - set(blend)
            if unknown:
                raise ValueError(f"unknown weight overrides: {sorted(unknown)}")
            blend.update(body.weight_overrides)

        vectors = state.gateway.embed([body.query] + [q.text for q in questions])
        qv = np.asarray(vectors[0])
        results = []
        for question, vec in zip(questions, vectors[1:]):
            v = np.asarray(vec)
            sim = float(qv @ v / (np.linalg.norm(qv) * np.linalg.norm(v)))
            record = records.get(question.id)
            hall = record.metrics.standard_anomaly if record else 0.0
            improvement = (
                (1.0 - record.metrics.correctness) * record.metrics.topic_relevance if record else 0.0
            )
            score = blend["similarity"] * sim + blend["hallucination"] * hall + blend["improvement"] * improvement
            results.append((score, sim, question, record))
        results.sort(key=lambda t: (-t[0], t[2].id))
        results = results[: body.limit]

        query_position = state.position_of(f"search:{body.query}", body.query)
        out = []
        for score, sim, question, record in results:
            position = state.position_of(f"question:{question.id}", question.text)
            out.append(
                {
                    "question_id": question.id,
                    "text": question.text,
                    "score": score,
                    "similarity": sim,
                    "metrics": record.metrics.to_json_dict() if record else None,
                    "position": {"x": position[0], "y": position[1]} if position else None,
                }
            )
        return {
            "query": {
                "text": body.query,
                "position": {"x": query_position[0], "y": query_position[1]} if query_position else None,
            },
            "results": out,
        }

    @app.get("/api/questions/{qid}/details")
    def get_question_details(qid: str):
        question = state.question_by_id(qid)
        record = state.latest_records().get(qid)
        if record is None:
            raise StateNotReady(f"question {qid!r} has no evaluation record yet")
        corpus = state.require_corpus()
        annotated = None
        if record.answer is not None and record.retrieval_run is not None:
            annotated = annotate_answer(record.answer, record.retrieval_run, corpus, state.gateway)
        return {
            "question_id": qid,
            "question_text": question.text,
            "ground_truth": question.ground_truth,
            "tags": sorted(question.tags),
            "answer_text": record.answer.text if record.answer else None,
            "related_chunks": len(record.retrieval_run.results) if record.retrieval_run else 0,
            "metrics": record.metrics.to_json_dict(),
            "record": record.to_json_dict(),
            "annotated_answer": annotated.to_json_dict() if annotated else None,
        }

    @app.get("/api/questions/{qid}/chunklink")
    def get_chunklink(qid: str, strategies: str = "plain,standard"):
        question = state.question_by_id(qid)
        corpus = state.require_corpus()
        kinds = [s.strip() for s in strategies.split(",") if s.strip()]
        if not (2 <= len(kinds) <= 3):
            raise ValueError("chunklink needs 2 or 3 strategies")
        runs = []
        for kind in kinds:
            if kind not in ("plain", "standard", "hyde"):
                raise ValueError(f"unknown strategy kind {kind!r}")
            strategy = RetrievalStrategy(kind=kind, k=state.weights.k_retrieve)
            run = retrieve(question, corpus, strategy, state.gateway)
            runs.append(classify_relevance(run, question, corpus, state.gateway, theta=state.weights.theta))
        data = build_chunk_relink(runs)
        chunk_info = {}
        for run in runs:
            for item in run.results:
                chunk = corpus.get(item.chunk_id)
                if chunk is not None and item.chunk_id not in chunk_info:
                    chunk_info[item.chunk_id] = {"text": chunk.text, "source_doc": chunk.source_doc}
        payload = data.to_json_dict()
        payload["chunks"] = chunk_info
        return payload

    @app.get("/api/questions/{qid}/evidence")
    def get_evidence(qid: str):
        state.question_by_id(qid)
        record = state.latest_records().get(qid)
        if record is None or record.answer is None or record.retrieval_run is None:
            raise StateNotReady(f"question {qid!r} has no evaluated answer yet")
        corpus = state.require_corpus()
        annotated = annotate_answer(record.answer, record.retrieval_run, corpus, state.gateway)
        graph = build_evidence_graph(annotated, record.retrieval_run, corpus, lexicon=state.lexicon)
        return {"annotated_answer": annotated.to_json_dict(), "graph": graph.to_json_dict()}

    # -- experiments ----------------------------------------------------------

    @app.post("/api/experiments")
    def post_experiment(body: ExperimentRequest):
        corpus = state.require_corpus()
        with state.lock:
            questions = list(state.questions)
        if not questions:
            raise StateNotReady("no question set uploaded")
        cfg = SamplingConfig.from_json_dict(body.config)
        strategy = RetrievalStrategy.from_json_dict(body.strategy)
        from .experiment import derive_run_id, sample_questions

        records = list(state.latest_records().values()) or None
        sampled = sample_questions(questions, records, cfg, seed=body.seed, gateway=state.gateway)
        run_id = derive_run_id(sampled, strategy, cfg, body.label)

        def job():
            run = execute_run(
                sampled, corpus, strategy, cfg, state.gateway, state.weights,
                label=body.label, run_id=run_id, before_run_id=body.before_run_id,
            )
            state.store.persist_run(run)

        job_id = state.jobs.submit(job)
        state.job_kinds[job_id] = "experiment"
        return JSONResponse(status_code=202, content={"run_id": run_id, "job_id": job_id})

    @app.get("/api/experiments")
    def list_experiments():
        return {"runs": state.store.list_runs()}

    @app.get("/api/experiments/{run_id}/radar")
    def get_radar(run_id: str, against: Optional[str] = None):
        runs = [state.store.load_run(run_id)]
        if against:
            for other in against.split(","):
                if other.strip():
                    runs.append(state.store.load_run(other.strip()))
        return {"charts": radar_data(runs)}

    # -- failures --------------------------------------------------------------

    @app.get("/api/failures")
    def get_failures(threshold: float = 0.5):
        if not (0.0 < threshold < 1.0):
            raise ValueError("threshold must lie in (0,1)")
        records = state.latest_records()
        if not records:
            raise MissingPriorRecords("no evaluation records; run an experiment first")
        questions = []
        for qid in sorted(records):
            record = records[qid]
            types = sorted(t for t, v in record.failure_weights.items() if v >= threshold)
            questions.append(
                {"question_id": qid, "weights": record.failure_weights, "failure_types": types}
            )
        return {
            "threshold": threshold,
            "anchors": [{"type": t, "order": i} for i, t in enumerate(FAILURE_TYPES)],
            "questions": questions,
        }

    return app


def _corpus_summary(corpus: Corpus) -> dict:
    return {
        "chunks": len(corpus),
        "dimension": corpus.dimension,
        "embedder_id": corpus.embedder_id,
        "created_at": corpus.created_at,
        "content_hash": corpus.content_hash(),
    }


def build_state(
    backend: str = "mock",
    corpus_dir: Optional[str] = None,
    questions_path: Optional[str] = None,
    store_dir: Optional[str] = None,
    lexicon_path: Optional[str] = None,
    weights: Optional[MetricWeights] = None,
) -> AppState:
    import json as _json
    import tempfile

    gateway = make_gateway(backend)
    store = RunStore(store_dir or Path(tempfile.mkdtemp(prefix="ragtrace-runs-")))
    lexicon = EntityLexicon(lexicon_path)
    state = AppState(gateway=gateway, store=store, lexicon=lexicon, weights=validate_weights(weights or MetricWeights()))
    if corpus_dir:
        state.corpus = load_corpus(corpus_dir)
    if questions_path:
        rows = [
            _json.loads(line)
            for line in Path(questions_path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        state.questions = [Question.from_json_dict(r) for r in rows]
    return state
