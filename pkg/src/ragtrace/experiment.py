"""Sampling configuration, question sampling, run execution across
configurations, and before/after radar comparison data.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import METRIC_AXES, MetricVector, MetricWeights, Question, canonical_json
from .diagnostics import EvaluationRecord, evaluate_question
from .errors import FocusNotFound, IoError, MissingPriorRecords, NoCommonQuestions, NotFound
from .gateway import Gateway
from .ingest import Corpus, utc_now_iso
from .retrieval import RetrievalStrategy

SELECTION_MODES = ("high_hallucination", "similarity_to_focus", "improvement_potential", "random")


@dataclass(frozen=True)
class SamplingConfig:
    diversity: float = 0.0
    num_chunks: int = 5
    keywords: tuple[str, ...] = ()
    tags: frozenset[str] = frozenset()
    num_questions: int = 5
    selection: str = "random"
    focus_question_id: Optional[str] = None

    def __post_init__(self):
        if not (0.0 <= self.diversity <= 2.0):
            raise ValueError("diversity must lie in [0,2]")
        if self.num_chunks < 1 or self.num_questions < 1:
            raise ValueError("num_chunks and num_questions must be >= 1")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.selection == "similarity_to_focus" and not self.focus_question_id:
            raise ValueError("similarity_to_focus requires focus_question_id")
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "tags", frozenset(self.tags))

    def to_json_dict(self) -> dict:
        return {
            "diversity": self.diversity,
            "num_chunks": self.num_chunks,
            "keywords": list(self.keywords),
            "tags": sorted(self.tags),
            "num_questions": self.num_questions,
            "selection": self.selection,
            "focus_question_id": self.focus_question_id,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SamplingConfig":
        return cls(
            diversity=d.get("diversity", 0.0),
            num_chunks=int(d.get("num_chunks", 5)),
            keywords=tuple(d.get("keywords") or ()),
            tags=frozenset(d.get("tags") or ()),
            num_questions=int(d.get("num_questions", 5)),
            selection=d.get("selection", "random"),
            focus_question_id=d.get("focus_question_id"),
        )


@dataclass(frozen=True)
class ExperimentRun:
    run_id: str
    label: str  # original | before | after | free text
    config: SamplingConfig
    strategy: RetrievalStrategy
    records: tuple[EvaluationRecord, ...]
    started_at: str
    finished_at: str
    before_run_id: Optional[str] = None  # lineage for "after" runs

    def __post_init__(self):
        ids = [r.question_id for r in self.records]
        if len(ids) != len(set(ids)):
            raise ValueError("question ids must be unique within a run")
        object.__setattr__(self, "records", tuple(self.records))

    def record_for(self, question_id: str) -> Optional[EvaluationRecord]:
        for r in self.records:
            if r.question_id == question_id:
                return r
        return None

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "label": self.label,
            "config": self.config.to_json_dict(),
            "strategy": self.strategy.to_json_dict(),
            "records": [r.to_json_dict() for r in self.records],
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "before_run_id": self.before_run_id,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentRun":
        return cls(
            run_id=d["run_id"],
            label=d["label"],
            config=SamplingConfig.from_json_dict(d["config"]),
            strategy=RetrievalStrategy.from_json_dict(d["strategy"]),
            records=tuple(EvaluationRecord.from_json_dict(r) for r in d["records"]),
            started_at=d["started_at"],
            finished_at=d["finished_at"],
            before_run_id=d.get("before_run_id"),
        )


def sample_questions(
    all_questions: Sequence[Question],
    records: Optional[Sequence[EvaluationRecord]],
    cfg: SamplingConfig,
    seed: int = 0,
    gateway: Optional[Gateway] = None,
) -> list[Question]:
    """Pick cfg.num_questions questions by the configured selection preset.

    Deterministic given the seed; questions without prior records rank after
    scored ones under record-based presets.
    """
    questions = list(all_questions)
    n = cfg.num_questions
    if n > len(questions):
        raise ValueError(f"cannot sample {n} of {len(questions)} questions")

    if cfg.selection == "random":
        rng = random.Random(seed)
        return rng.sample(questions, n)

    if cfg.selection == "similarity_to_focus":
        focus = next((q for q in questions if q.id == cfg.focus_question_id), None)
        if focus is None:
            raise FocusNotFound(f"focus question {cfg.focus_question_id!r} not found")
        if gateway is None:
            raise ValueError("similarity_to_focus requires a gateway for embeddings")
        candidates = [q for q in questions if q.id != focus.id]
        vectors = gateway.embed([focus.text] + [q.text for q in candidates])
        fv = np.asarray(vectors[0])
        scores = []
        for q, vec in zip(candidates, vectors[1:]):
            v = np.asarray(vec)
            sim = float(np.dot(fv, v) / (np.linalg.norm(fv) * np.linalg.norm(v)))
            scores.append((q, sim))
        scores.sort(key=lambda pair: (-pair[1], pair[0].id))
        return [q for q, _ in scores[:n]]

    # Record-based presets.
    if not records:
        raise MissingPriorRecords(f"selection {cfg.selection!r} needs prior evaluation records")
    by_question = {r.question_id: r for r in records}

    def score(q: Question) -> Optional[float]:
        r = by_question.get(q.id)
        if r is None:
            return None
        if cfg.selection == "high_hallucination":
            return r.metrics.standard_anomaly
        return (1.0 - r.metrics.correctness) * r.metrics.topic_relevance

    keyed = []
    for q in questions:
        s = score(q)
        keyed.append((0 if s is not None else 1, -(s or 0.0), q.id, q))
    keyed.sort(key=lambda t: t[:3])
    return [q for _, _, _, q in keyed[:n]]


def execute_run(
    questions: Sequence[Question],
    corpus: Corpus,
    strategy: RetrievalStrategy,
    cfg: SamplingConfig,
    gateway: Gateway,
    weights: MetricWeights,
    label: str = "original",
    run_id: Optional[str] = None,
    before_run_id: Optional[str] = None,
    clock: Optional[Callable[[], str]] = None,
    max_workers: int = 4,
) -> ExperimentRun:
    """Evaluate every question under one configuration.

    Retrieval takes k, keywords and tags from the sampling config. A failing
    question produces a record with its error field set; the others complete.
    """
    now = clock or utc_now_iso
    started = now()
    effective = replace(strategy, k=cfg.num_chunks, keywords=cfg.keywords, tags=cfg.tags)

    def one(question: Question) -> EvaluationRecord:
        try:
            return evaluate_question(question, corpus, effective, gateway, weights, diversity=cfg.diversity)
        except Exception as exc:  # per-question isolation
            zero = MetricVector.zeros()
            return EvaluationRecord(
                question_id=question.id,
                retrieval_run=None,
                answer=None,
                metrics=zero,
                failure_weights=zero.failure_weights(),
                error=f"{type(exc).__name__}: {exc}",
            )

    if questions:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(questions))) as pool:
            records = tuple(pool.map(one, questions))
    else:
        records = ()
    finished = now()
    rid = run_id or derive_run_id(questions, strategy, cfg, label)
    return ExperimentRun(
        run_id=rid,
        label=label,
        config=cfg,
        strategy=effective,
        records=records,
        started_at=started,
        finished_at=finished,
        before_run_id=before_run_id,
    )


def derive_run_id(questions: Sequence[Question], strategy: RetrievalStrategy, cfg: SamplingConfig, label: str) -> str:
    payload = canonical_json(
        {
            "questions": [q.id for q in questions],
            "strategy": strategy.to_json_dict(),
            "config": cfg.to_json_dict(),
            "label": label,
        }
    )
    return "r" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def radar_data(runs: Sequence[ExperimentRun]) -> list[dict]:
    """Per-question radar charts: fixed axis order, one series per run that
    contains the question. Topic relevance is mapped to [0,1] for the chart."""
    runs = list(runs)
    if not runs:
        raise ValueError("radar_data needs at least one run")
    ids_per_run = [set(r.question_id for r in run.records) for run in runs]
    union = sorted(set().union(*ids_per_run))
    if len(runs) >= 2:
        shared = any(sum(qid in ids for ids in ids_per_run) >= 2 for qid in union)
        if not shared:
            raise NoCommonQuestions("no question id appears in more than one run")
    charts = []
    for qid in union:
        series = {}
        for run in runs:
            record = run.record_for(qid)
            if record is None:
                continue
            values = []
            for axis in METRIC_AXES:
                v = getattr(record.metrics, axis)
                if axis == "topic_relevance":
                    v = (v + 1.0) / 2.0
                values.append(v)
            series[run.label] = values
        charts.append({"question_id": qid, "axes": list(METRIC_AXES), "series": series})
    return charts


class RunStore:
    """Directory of <run_id>.json files plus an index.json manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _read_index(self) -> list[dict]:
        if not self._index_path.exists():
            return []
        try:
            return json.loads(self._index_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IoError(f"reading run index: {exc}") from exc

    def persist_run(self, run: ExperimentRun) -> None:
        with self._lock:
            try:
                (self.root / f"{run.run_id}.json").write_text(
                    canonical_json(run.to_json_dict()), encoding="utf-8"
                )
            except OSError as exc:
                raise IoError(f"writing run {run.run_id}: {exc}") from exc
            index = [row for row in self._read_index() if row["run_id"] != run.run_id]
            index.append(
                {
                    "run_id": run.run_id,
                    "label": run.label,
                    "started_at": run.started_at,
                    "finished_at": run.finished_at,
                    "questions": len(run.records),
                }
            )
            try:
                self._index_path.write_text(json.dumps(index, indent=1), encoding="utf-8")
            except OSError as exc:
                raise IoError(f"writing run index: {exc}") from exc

    def load_run(self, run_id: str) -> ExperimentRun:
        path = self.root / f"{run_id}.json"
        if not path.exists():
            raise NotFound(f"run {run_id!r} not found")
        try:
            return ExperimentRun.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise IoError(f"reading run {run_id}: {exc}") from exc

    def list_runs(self) -> list[dict]:
        return self._read_index()
