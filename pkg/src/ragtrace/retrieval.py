"""Retrieval strategies, relevance classification and cross-run comparison data.

Three strategies share one contract: plain (question text), standard
(question + ground truth, approximating ideal retrieval) and hyde
(a generated hypothetical answer document stands in for the query).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import Chunk, Question
from .errors import MissingGroundTruth
from .gateway import Gateway
from .ingest import Corpus

RELEVANCE_CLASSES = ("relevant", "irrelevant", "negative")

KEYWORD_BOOST_PER_HIT = 0.05


@dataclass(frozen=True)
class RetrievalStrategy:
    kind: str = "plain"  # plain | standard | hyde
    k: int = 10
    keywords: tuple[str, ...] = ()
    tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.kind not in ("plain", "standard", "hyde"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "tags", frozenset(self.tags))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "keywords": list(self.keywords),
            "tags": sorted(self.tags),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RetrievalStrategy":
        return cls(
            kind=d.get("kind", "plain"),
            k=int(d.get("k", 10)),
            keywords=tuple(d.get("keywords") or ()),
            tags=frozenset(d.get("tags") or ()),
        )


@dataclass(frozen=True)
class RetrievedItem:
    chunk_id: str
    similarity: float
    relevance_class: str = "irrelevant"

    def __post_init__(self):
        if self.relevance_class not in RELEVANCE_CLASSES:
            raise ValueError(f"unknown relevance class {self.relevance_class!r}")

    def to_json_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "similarity": self.similarity,
            "relevance_class": self.relevance_class,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RetrievedItem":
        return cls(chunk_id=d["chunk_id"], similarity=d["similarity"], relevance_class=d["relevance_class"])


@dataclass(frozen=True)
class RetrievalRun:
    strategy: RetrievalStrategy
    query_text_used: str
    results: tuple[RetrievedItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))
        sims = [r.similarity for r in self.results]
        if any(a < b for a, b in zip(sims, sims[1:])):
            raise ValueError("results must be sorted by similarity descending")

    def chunk_ids(self) -> tuple[str, ...]:
        return tuple(r.chunk_id for r in self.results)

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy.to_json_dict(),
            "query_text_used": self.query_text_used,
            "results": [r.to_json_dict() for r in self.results],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RetrievalRun":
        return cls(
            strategy=RetrievalStrategy.from_json_dict(d["strategy"]),
            query_text_used=d["query_text_used"],
            results=tuple(RetrievedItem.from_json_dict(r) for r in d["results"]),
        )


@dataclass(frozen=True)
class ChunkRelinkData:
    """Side-by-side comparison of 2-3 runs with links joining identical chunk ids."""

    runs: tuple[RetrievalRun, ...]
    links: tuple[tuple[int, int, int, int], ...]  # (run_a, rank_a, run_b, rank_b)
    node_sizes: tuple[tuple[float, ...], ...]  # per run, per rank

    def to_json_dict(self) -> dict:
        return {
            "runs": [r.to_json_dict() for r in self.runs],
            "links": [
                {"run_a": a, "rank_a": ra, "run_b": b, "rank_b": rb}
                for a, ra, b, rb in self.links
            ],
            "node_sizes": [list(sizes) for sizes in self.node_sizes],
        }


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _keyword_hits(text: str, keywords: Sequence[str]) -> int:
    lowered = text.lower()
    return sum(1 for kw in keywords if kw and kw.lower() in lowered)


def _search(corpus: Corpus, query_text: str, strategy: RetrievalStrategy, gateway: Gateway) -> list[RetrievedItem]:
    """Tag filter, score the whole filtered corpus, boost, then take top k.

    The boost multiplies cosine by (1 + 0.05 * keyword hits) before ranking,
    so a boosted chunk can enter the result set, not just move inside it.
    """
    candidates = [
        c for c in corpus.chunks
        if not strategy.tags or strategy.tags & _chunk_tags(c)
    ]
    if not candidates:
        return []
    query_vec = gateway.embed([query_text.strip()])[0]
    qnorm = np.linalg.norm(query_vec)
    matrix = np.asarray([c.embedding for c in candidates], dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    sims = (matrix @ np.asarray(query_vec, dtype=np.float64)) / (norms * qnorm)
    if strategy.keywords:
        boosts = np.asarray([1.0 + KEYWORD_BOOST_PER_HIT * _keyword_hits(c.text, strategy.keywords) for c in candidates])
        sims = sims * boosts
    order = sorted(range(len(candidates)), key=lambda i: (-sims[i], candidates[i].id))
    top = order[: min(strategy.k, len(candidates))]
    return [RetrievedItem(chunk_id=candidates[i].id, similarity=float(sims[i])) for i in top]


def _chunk_tags(chunk: Chunk) -> frozenset[str]:
    # Chunks carry no first-class tags; the source document name doubles as one.
    return frozenset({chunk.source_doc})


def retrieve_plain(question: Question, corpus: Corpus, strategy: RetrievalStrategy, gateway: Gateway) -> RetrievalRun:
    if strategy.kind != "plain":
        raise ValueError(f"retrieve_plain requires kind=plain, got {strategy.kind!r}")
    results = _search(corpus, question.text, strategy, gateway)
    return RetrievalRun(strategy=strategy, query_text_used=question.text, results=tuple(results))


def retrieve_standard(question: Question, corpus: Corpus, strategy: RetrievalStrategy, gateway: Gateway) -> RetrievalRun:
    """Retrieve with question + ground truth concatenated (reference retrieval)."""
    if question.ground_truth is None:
        raise MissingGroundTruth(f"question {question.id!r} has no ground truth")
    query = f"{question.text} {question.ground_truth}"
    strategy = replace(strategy, kind="standard")
    results = _search(corpus, query, strategy, gateway)
    return RetrievalRun(strategy=strategy, query_text_used=query, results=tuple(results))


def retrieve_hyde(question: Question, corpus: Corpus, strategy: RetrievalStrategy, gateway: Gateway) -> RetrievalRun:
    """Generate a hypothetical answer document and retrieve on its embedding."""
    if strategy.kind != "hyde":
        raise ValueError(f"retrieve_hyde requires kind=hyde, got {strategy.kind!r}")
    hypothetical = gateway.generate(
        f"Write a short passage that would answer the question: {question.text}",
        context_chunks=(),
        diversity=0.0,
    ).text
    results = _search(corpus, hypothetical, strategy, gateway)
    return RetrievalRun(strategy=strategy, query_text_used=hypothetical, results=tuple(results))


def retrieve(question: Question, corpus: Corpus, strategy: RetrievalStrategy, gateway: Gateway) -> RetrievalRun:
    if strategy.kind == "plain":
        return retrieve_plain(question, corpus, strategy, gateway)
    if strategy.kind == "standard":
        return retrieve_standard(question, corpus, strategy, gateway)
    return retrieve_hyde(question, corpus, strategy, gateway)


def classify_relevance(
    run: RetrievalRun,
    question: Question,
    corpus: Corpus,
    gateway: Gateway,
    theta: float = 0.8,
) -> RetrievalRun:
    """Fill relevance classes against the ground truth.

    relevant: similar to the ground truth itself; negative: on-topic for the
    question but judged unsupportive of the ground truth; irrelevant otherwise.
    Without a ground truth everything is irrelevant.
    """
    if question.ground_truth is None:
        results = tuple(replace(r, relevance_class="irrelevant") for r in run.results)
        return replace(run, results=results)
    truth_vec, question_vec = gateway.embed([question.ground_truth, question.text])
    classified = []
    for item in run.results:
        chunk = corpus.get(item.chunk_id)
        if chunk is None:
            classified.append(replace(item, relevance_class="irrelevant"))
            continue
        emb = np.asarray(chunk.embedding, dtype=np.float64)
        if _cosine(emb, truth_vec) >= theta:
            cls = "relevant"
        elif _cosine(emb, question_vec) >= theta and gateway.judge_fact_support(question.ground_truth, [chunk]).score <= 1e-9:
            cls = "negative"
        else:
            cls = "irrelevant"
        classified.append(replace(item, relevance_class=cls))
    return replace(run, results=tuple(classified))


def build_chunk_relink(runs: Sequence[RetrievalRun]) -> ChunkRelinkData:
    """Enumerate every cross-run coincidence of a chunk id, once per run pair."""
    runs = tuple(runs)
    if not (2 <= len(runs) <= 3):
        raise ValueError(f"chunk-relink comparison needs 2 or 3 runs, got {len(runs)}")
    links: list[tuple[int, int, int, int]] = []
    for a in range(len(runs)):
        rank_a = {item.chunk_id: i for i, item in enumerate(runs[a].results)}
        for b in range(a + 1, len(runs)):
            for j, item in enumerate(runs[b].results):
                i = rank_a.get(item.chunk_id)
                if i is not None:
                    links.append((a, i, b, j))
    links.sort()
    node_sizes = tuple(tuple(item.similarity for item in run.results) for run in runs)
    return ChunkRelinkData(runs=runs, links=tuple(links), node_sizes=node_sizes)
