"""Entity expansion with a persistent lexicon cache, entity-set comparison,
citation verification, confidence-span annotation and the entity-to-chunk
evidence graph.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import IoError
from .gateway import Gateway, GenerationResult
from .ingest import Corpus
from .projection import entity_spans, extract_entities
from .retrieval import RetrievalRun
from .textutils import claim_text, sentence_spans

SPAN_CLASSES = ("named_entity", "evidence_supported", "uncertain")


def _context_hash(context: str) -> str:
    return hashlib.blake2b(context.encode("utf-8"), digest_size=8).hexdigest()


class EntityLexicon:
    """Disk-backed cache of per-context entity expansions.

    One JSON file keyed by hex(context_hash) + "/" + entity; lookups are pure
    until explicitly invalidated. Concurrent readers are fine, writes are
    serialized.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path else None
        self._cache: dict[str, dict[str, list[str]]] = {}
        self._lock = threading.RLock()
        if self.path and self.path.exists():
            try:
                self._cache = json.loads(self.path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise IoError(f"reading lexicon {self.path}: {exc}") from exc

    @staticmethod
    def key(entity: str, context: str) -> str:
        return f"{_context_hash(context)}/{entity}"

    def get(self, entity: str, context: str) -> Optional[tuple[set[str], set[str]]]:
        with self._lock:
            hit = self._cache.get(self.key(entity, context))
        if hit is None:
            return None
        return set(hit["synonyms"]), set(hit["antonyms"])

    def put(self, entity: str, context: str, synonyms: set[str], antonyms: set[str]) -> None:
        with self._lock:
            self._cache[self.key(entity, context)] = {
                "synonyms": sorted(synonyms),
                "antonyms": sorted(antonyms),
            }
            self._flush()

    def invalidate(self, entity: str, context: str) -> None:
        with self._lock:
            self._cache.pop(self.key(entity, context), None)
            self._flush()

    def synonyms_anywhere(self, entity: str) -> set[str]:
        """Union of the entity's cached synonyms across all contexts."""
        suffix = f"/{entity}"
        with self._lock:
            out: set[str] = set()
            for key, value in self._cache.items():
                if key.endswith(suffix):
                    out.update(value["synonyms"])
            return out

    def _flush(self) -> None:
        if self.path is None:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(self._cache, sort_keys=True, indent=1), encoding="utf-8")
        except OSError as exc:
            raise IoError(f"writing lexicon {self.path}: {exc}") from exc


def expand_entity(
    entity: str,
    context: str,
    lexicon: EntityLexicon,
    gateway: Gateway,
) -> tuple[set[str], set[str]]:
    """Contextual synonyms/antonyms, served from the cache when possible."""
    if not entity:
        raise ValueError("entity must be non-empty")
    cached = lexicon.get(entity, context)
    if cached is not None:
        return cached
    synonyms, antonyms = gateway.expand_entity(entity, context)
    lexicon.put(entity, context, synonyms, antonyms)
    return synonyms, antonyms


def compare_entity_sets(
    ground_truth: str,
    answer: str,
    lexicon: EntityLexicon,
    gateway: Gateway,
) -> tuple[float, float, float]:
    """Precision/recall/F1 of answer entities against ground-truth entities.

    A match is string equality or the answer entity appearing in the truth
    entity's synonym set (expanded in the ground-truth context). Both sets
    empty counts as a perfect score; an empty side against a non-empty one
    scores zero.
    """
    if not ground_truth or not answer:
        raise ValueError("both texts must be non-empty")
    truth_entities = [e for e, _ in extract_entities([ground_truth])]
    answer_entities = [e for e, _ in extract_entities([answer])]

    synonyms: dict[str, set[str]] = {}
    for te in truth_entities:
        syn, _ = expand_entity(te, ground_truth, lexicon, gateway)
        synonyms[te] = syn

    def matches(ans: str, truth: str) -> bool:
        return ans == truth or ans in synonyms[truth]

    if not answer_entities and not truth_entities:
        return 1.0, 1.0, 1.0
    if not answer_entities or not truth_entities:
        return 0.0, 0.0, 0.0
    matched_answer = sum(1 for a in answer_entities if any(matches(a, t) for t in truth_entities))
    matched_truth = sum(1 for t in truth_entities if any(matches(a, t) for a in answer_entities))
    precision = matched_answer / len(answer_entities)
    recall = matched_truth / len(truth_entities)
    f1 = 0.0 if precision + recall == 0.0 else 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def verify_citation(
    citation_chunk_id: str,
    claim_sentence: str,
    run: RetrievalRun,
    corpus: Corpus,
    gateway: Gateway,
) -> tuple[bool, float]:
    """(valid, support score) for one citation against its cited chunk."""
    if not claim_sentence:
        raise ValueError("claim must be non-empty")
    if citation_chunk_id not in run.chunk_ids():
        return False, 0.0
    chunk = corpus.get(citation_chunk_id)
    if chunk is None:
        return False, 0.0
    verdict = gateway.judge_fact_support(claim_text(claim_sentence) or claim_sentence, [chunk])
    return verdict.score >= 0.5, verdict.score


@dataclass(frozen=True)
class AnnotatedAnswer:
    text: str
    spans: tuple[tuple[int, int, str, frozenset[str]], ...]  # (start, end, class, supporting ids)

    def __post_init__(self):
        last_end = 0
        for start, end, cls, _ in sorted(self.spans):
            if cls not in SPAN_CLASSES:
                raise ValueError(f"unknown span class {cls!r}")
            if start < last_end or end > len(self.text) or start >= end:
                raise ValueError(f"span ({start},{end}) overlaps or is out of bounds")
            last_end = end

    def to_json_dict(self) -> dict:
        return {
            "text": self.text,
            "spans": [
                {"start": s, "end": e, "class": c, "supporting_chunk_ids": sorted(ids)}
                for s, e, c, ids in self.spans
            ],
        }


def annotate_answer(
    answer: GenerationResult,
    run: RetrievalRun,
    corpus: Corpus,
    gateway: Gateway,
) -> AnnotatedAnswer:
    """Classify answer spans: named entities, evidence-supported sentences
    (judged against the retrieved chunks), uncertain otherwise.

    Entity spans take priority; the rest of each sentence inherits the
    sentence's support class. Spans never overlap.
    """
    text = answer.text
    if not text:
        raise ValueError("answer text must be non-empty")
    chunks = [c for c in (corpus.get(cid) for cid in run.chunk_ids()) if c is not None]
    entity_positions = [(start, end) for _, start, end, _ in entity_spans(text)]

    spans: list[tuple[int, int, str, frozenset[str]]] = []
    for s_start, s_end in sentence_spans(text):
        sentence = text[s_start:s_end]
        claim = claim_text(sentence)
        supporting: set[str] = set()
        best = 0.0
        if claim:
            for chunk in chunks:
                score = gateway.judge_fact_support(claim, [chunk]).score
                if score > best:
                    best = score
                if score >= 0.5:
                    supporting.add(chunk.id)
        sentence_class = "evidence_supported" if best >= 0.5 else "uncertain"
        support_ids = frozenset(supporting)

        inner_entities = [
            (max(e_start, s_start), min(e_end, s_end))
            for e_start, e_end in entity_positions
            if e_start < s_end and e_end > s_start
        ]
        cursor = s_start
        for e_start, e_end in sorted(inner_entities):
            if e_start > cursor:
                spans.append((cursor, e_start, sentence_class, support_ids))
            spans.append((e_start, e_end, "named_entity", support_ids))
            cursor = e_end
        if cursor < s_end:
            spans.append((cursor, s_end, sentence_class, support_ids))
    return AnnotatedAnswer(text=text, spans=tuple(spans))


@dataclass(frozen=True)
class EvidenceGraph:
    nodes: tuple[str, ...]  # entity names and chunk ids
    edges: tuple[tuple[str, str, float], ...]  # (entity, chunk_id, support score)

    def __post_init__(self):
        node_set = set(self.nodes)
        for entity, chunk_id, score in self.edges:
            if entity not in node_set or chunk_id not in node_set:
                raise ValueError("edges must reference existing nodes")
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"support score out of range: {score!r}")

    def to_json_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"entity": e, "chunk_id": c, "support_score": s} for e, c, s in self.edges],
        }


LITERAL_SUPPORT = 1.0
SYNONYM_SUPPORT = 0.7


def build_evidence_graph(
    annotated: AnnotatedAnswer,
    run: RetrievalRun,
    corpus: Corpus,
    lexicon: Optional[EntityLexicon] = None,
) -> EvidenceGraph:
    """Link each named entity to the chunks containing it (1.0) or a cached
    synonym of it (0.7). Entities without evidence stay as isolated nodes."""
    entities: list[str] = []
    for start, end, cls, _ in annotated.spans:
        if cls == "named_entity":
            name = annotated.text[start:end].lower()
            if name not in entities:
                entities.append(name)
    chunk_ids = list(run.chunk_ids())
    chunks = [(cid, corpus.get(cid)) for cid in chunk_ids]
    edges: list[tuple[str, str, float]] = []
    for entity in entities:
        syns = lexicon.synonyms_anywhere(entity) if lexicon is not None else set()
        for cid, chunk in chunks:
            if chunk is None:
                continue
            lowered = chunk.text.lower()
            if entity in lowered:
                edges.append((entity, cid, LITERAL_SUPPORT))
            elif any(s.lower() in lowered for s in syns):
                edges.append((entity, cid, SYNONYM_SUPPORT))
    return EvidenceGraph(nodes=tuple(entities + chunk_ids), edges=tuple(edges))
