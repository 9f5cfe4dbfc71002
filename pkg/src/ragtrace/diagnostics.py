"""The four granular diagnostic metrics, the two composite metrics, and
failure-type classification.

Sign conventions: the retrieval-failure and generation-anomaly formulas are
implemented so that larger always means worse (miss rate instead of hit rate,
1 - confidence instead of confidence). ``literal_eq1`` / ``literal_eq3``
restore the uninverted sums for comparison.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import Chunk, MetricVector, MetricWeights, Question
from .errors import EmptyRetrieval, GatewayError
from .gateway import GenerationResult, Gateway
from .ingest import Corpus
from .retrieval import RetrievalRun, RetrievalStrategy, retrieve, retrieve_plain
from .textutils import claim_text, split_sentences, strip_citation_markers

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Retrieval failure (hit/miss on gold chunks + retrieval-set dispersion)
# ---------------------------------------------------------------------------

def _unit_rows(vectors: Sequence[Sequence[float]]) -> np.ndarray:
    m = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return m / norms


def dispersion_entropy(embeddings: Sequence[Sequence[float]]) -> float:
    """Mean normalized entropy of the softmax of each retrieved chunk's
    similarity row against the whole retrieved set. 0 for a single chunk,
    exactly 1 when all rows are constant (uniform softmax)."""
    n = len(embeddings)
    if n <= 1:
        return 0.0
    unit = _unit_rows(embeddings)
    cosine = unit @ unit.T
    log_n = math.log(n)
    total = 0.0
    for row in cosine:
        if np.all(row == row[0]):
            total += 1.0  # constant row: softmax is uniform, entropy is ln(n)
            continue
        shifted = np.exp(row - np.max(row))
        p = shifted / shifted.sum()
        entropy = float(-(p * np.log(np.maximum(p, 1e-300))).sum())
        total += entropy / log_n
    return total / n


def retrieval_failure_value(
    gold: Sequence[Chunk],
    retrieved: Sequence[tuple[Chunk, float]],
    w: MetricWeights,
    literal_eq1: bool = False,
) -> float:
    """alpha * gold miss rate (threshold-tested best similarity) + beta * dispersion."""
    if not retrieved:
        raise EmptyRetrieval("retrieval failure needs at least one retrieved chunk")
    retrieved_unit = _unit_rows([c.embedding for c, _ in retrieved])
    if gold:
        gold_unit = _unit_rows([g.embedding for g in gold])
        best = (gold_unit @ retrieved_unit.T).max(axis=1)
        hit_rate = float(np.mean(best >= w.theta))
    else:
        hit_rate = 1.0
    first_term = hit_rate if literal_eq1 else 1.0 - hit_rate
    dispersion = dispersion_entropy([c.embedding for c, _ in retrieved])
    return min(1.0, max(0.0, w.alpha_retrieval * first_term + w.beta_retrieval * dispersion))


# ---------------------------------------------------------------------------
# Prompt fragility (retrieval divergence across question paraphrases)
# ---------------------------------------------------------------------------

def semantic_consistency(variation_chunks: Sequence[np.ndarray]) -> float:
    """Mean over variations k and ordered chunk pairs (i, j != i) of the best
    cross-variation similarity max over l != k of cos(d_ik, d_jl).

    Each array holds one variation's retrieved-chunk embeddings, row per chunk.
    Fewer than two variations or two chunks is trivially consistent (1.0).
    """
    m = len(variation_chunks)
    if m < 2:
        return 1.0
    n = min(arr.shape[0] for arr in variation_chunks)
    if n < 2:
        return 1.0
    units = [_unit_rows(arr[:n]) for arr in variation_chunks]
    total = 0.0
    for k in range(m):
        best: Optional[np.ndarray] = None
        for l in range(m):
            if l == k:
                continue
            sims = units[k] @ units[l].T  # (i, j): cos(d_ik, d_jl)
            best = sims if best is None else np.maximum(best, sims)
        off_diagonal = best.sum() - np.trace(best)
        total += off_diagonal
    return total / (n * (n - 1) * m)


def paraphrase_variations(question: Question, gateway: Gateway, m: int) -> list[str]:
    """The original question plus m-1 gateway-generated paraphrases."""
    variations = [question.text]
    for i in range(1, m):
        prompt = f"Rewrite the following question, keeping its meaning (variant {i}): {question.text}"
        variations.append(gateway.generate(prompt, context_chunks=(), diversity=0.0).text)
    return variations


def prompt_fragility_value(
    question: Question,
    corpus: Corpus,
    strategy: RetrievalStrategy,
    gateway: Gateway,
    w: MetricWeights,
) -> tuple[float, list[str]]:
    """1 - semantic consistency of top-k retrievals across question paraphrases.

    Retrieval per variation uses plain semantics with the strategy's keywords
    and tags; the formula's n is w.k_retrieve.
    """
    if w.m_variations < 2:
        raise ValueError("m_variations must be >= 2")
    variations = paraphrase_variations(question, gateway, w.m_variations)
    probe = replace(strategy, kind="plain", k=w.k_retrieve)
    matrices = []
    for text in variations:
        run = retrieve_plain(Question(id=question.id, text=text), corpus, probe, gateway)
        embeddings = [corpus.get(item.chunk_id).embedding for item in run.results]
        matrices.append(np.asarray(embeddings, dtype=np.float64).reshape(len(embeddings), -1))
    consistency = semantic_consistency(matrices)
    fragility = 1.0 - min(1.0, max(0.0, consistency))
    return fragility, variations


# ---------------------------------------------------------------------------
# Generation anomaly (low confidence + erroneous citations)
# ---------------------------------------------------------------------------

def generation_anomaly_value(
    answer: GenerationResult,
    run: RetrievalRun,
    corpus: Corpus,
    gateway: Gateway,
    w: MetricWeights,
    literal_eq3: bool = False,
) -> float:
    """alpha * (1 - mean confidence) + beta * erroneous-citation ratio.

    A citation is erroneous when its id is not in the retrieval run or the
    judge finds the citing sentence unsupported by the cited chunk. Judge
    failures count the citation as erroneous and are logged.
    """
    retrieved_ids = set(run.chunk_ids())
    sentences = split_sentences(answer.text)
    erroneous = 0
    for cid in answer.citations:
        if cid not in retrieved_ids:
            erroneous += 1
            continue
        chunk = corpus.get(cid)
        if chunk is None:
            erroneous += 1
            continue
        citing = next((s for s in sentences if f"[chunk:{cid}]" in s), answer.text)
        claim = claim_text(citing)
        if not claim:
            erroneous += 1
            continue
        try:
            verdict = gateway.judge_fact_support(claim, [chunk])
        except GatewayError as exc:
            log.warning("fact-support judge failed for citation %s: %s", cid, exc)
            erroneous += 1
            continue
        if verdict.score < 0.5:
            erroneous += 1
    ratio = erroneous / max(1, len(answer.citations))
    confidence_term = answer.mean_confidence if literal_eq3 else 1.0 - answer.mean_confidence
    return min(1.0, max(0.0, w.alpha_gen * confidence_term + w.beta_gen * ratio))


# ---------------------------------------------------------------------------
# Standard anomaly (judged uncertainty + unsupported-fact fraction)
# ---------------------------------------------------------------------------

def standard_anomaly_value(
    answer_text: str,
    kb_evidence: Sequence[Chunk],
    gateway: Gateway,
    w: MetricWeights,
) -> float:
    """alpha * GPTCheck uncertainty + beta * (1 - mean sentence fact support)."""
    if not answer_text:
        raise ValueError("answer_text must be non-empty")
    clean = strip_citation_markers(answer_text) or answer_text
    uncertainty = gateway.judge_uncertainty(clean).score
    sentences = [claim_text(s) for s in split_sentences(clean)]
    sentences = [s for s in sentences if s]
    if sentences and kb_evidence:
        support = sum(gateway.judge_fact_support(s, kb_evidence).score for s in sentences) / len(sentences)
    else:
        support = 0.0
    return min(1.0, max(0.0, w.alpha_std * uncertainty + w.beta_std * (1.0 - support)))


# ---------------------------------------------------------------------------
# Composite metrics: correctness (BLEU-4 + ROUGE-L) and topic relevance
# ---------------------------------------------------------------------------

def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """BLEU-4 with brevity penalty, uniform weights and plain clipped counts.

    An n-gram order that neither side can form is vacuously perfect, so that
    identical short strings still score 1; an order the candidate misses but
    the reference has zeroes the score (no smoothing).
    """
    cand = candidate.lower().split()
    ref = reference.lower().split()
    if not cand or not ref:
        return 0.0
    precisions = []
    for n in range(1, 5):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        if not cand_ngrams:
            precisions.append(1.0 if not ref_ngrams else 0.0)
            continue
        clipped = sum(min(count, ref_ngrams[g]) for g, count in cand_ngrams.items())
        precisions.append(clipped / sum(cand_ngrams.values()))
    if any(p == 0.0 for p in precisions):
        return 0.0
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(sum(math.log(p) for p in precisions) / 4.0)


def rouge_l_f1(candidate: str, reference: str) -> float:
    cand = candidate.lower().split()
    ref = reference.lower().split()
    if not cand or not ref:
        return 0.0
    # LCS length by dynamic programming over token sequences.
    prev = [0] * (len(ref) + 1)
    for tok in cand:
        curr = [0]
        for j, rtok in enumerate(ref, start=1):
            curr.append(prev[j - 1] + 1 if tok == rtok else max(prev[j], curr[j - 1]))
        prev = curr
    lcs = prev[-1]
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def correctness(answer_text: str, ground_truth: str) -> float:
    """0.5 * BLEU-4 + 0.5 * ROUGE-L F1 over lowercased whitespace tokens."""
    if not answer_text or not ground_truth:
        raise ValueError("correctness needs non-empty answer and ground truth")
    return 0.5 * bleu4(answer_text, ground_truth) + 0.5 * rouge_l_f1(answer_text, ground_truth)


def topic_relevance(answer_text: str, question: Question, gateway: Gateway) -> float:
    """Cosine of the answer embedding and the question(+ground truth) embedding."""
    if not answer_text:
        raise ValueError("answer_text must be non-empty")
    target = question.text if question.ground_truth is None else f"{question.text} {question.ground_truth}"
    answer_vec, target_vec = gateway.embed([answer_text, target])
    value = float(
        np.dot(answer_vec, target_vec) / (np.linalg.norm(answer_vec) * np.linalg.norm(target_vec))
    )
    return min(1.0, max(-1.0, value))


# ---------------------------------------------------------------------------
# Evaluation records and failure classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationRecord:
    """Everything computed for one question in one run."""

    question_id: str
    retrieval_run: Optional[RetrievalRun]
    answer: Optional[GenerationResult]
    metrics: MetricVector
    failure_weights: dict[str, float]
    error: Optional[str] = None

    def __post_init__(self):
        expected = self.metrics.failure_weights()
        if self.failure_weights != expected:
            raise ValueError("failure_weights must mirror the corresponding metric values")

    def to_json_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "retrieval_run": self.retrieval_run.to_json_dict() if self.retrieval_run else None,
            "answer": self.answer.to_json_dict() if self.answer else None,
            "metrics": self.metrics.to_json_dict(),
            "failure_weights": dict(sorted(self.failure_weights.items())),
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvaluationRecord":
        return cls(
            question_id=d["question_id"],
            retrieval_run=RetrievalRun.from_json_dict(d["retrieval_run"]) if d.get("retrieval_run") else None,
            answer=GenerationResult.from_json_dict(d["answer"]) if d.get("answer") else None,
            metrics=MetricVector.from_json_dict(d["metrics"]),
            failure_weights=dict(d["failure_weights"]),
            error=d.get("error"),
        )


def resolve_gold_chunks(question: Question, corpus: Corpus, gateway: Gateway) -> list[Chunk]:
    """Gold chunks from annotations, else a derived standard chunk from the
    question + ground truth concatenation, else nothing."""
    if question.gold_chunk_ids:
        return [corpus.get(cid) for cid in sorted(question.gold_chunk_ids) if corpus.get(cid) is not None]
    if question.ground_truth:
        text = f"{question.text} {question.ground_truth}"
        vec = gateway.embed([text])[0]
        return [
            Chunk(
                id=f"std-{question.id}",
                text=text,
                source_doc="derived-standard",
                position=0,
                embedding=tuple(float(v) for v in vec),
            )
        ]
    return []


def evaluate_question(
    question: Question,
    corpus: Corpus,
    strategy: RetrievalStrategy,
    gateway: Gateway,
    weights: MetricWeights,
    diversity: float = 0.0,
) -> EvaluationRecord:
    """Retrieve, generate and compute all six metrics for one question."""
    run = retrieve(question, corpus, strategy, gateway)
    context = [corpus.get(item.chunk_id) for item in run.results]
    answer = gateway.generate(question.text, context_chunks=context, diversity=diversity)

    gold = resolve_gold_chunks(question, corpus, gateway)
    retrieved_pairs = [(corpus.get(item.chunk_id), item.similarity) for item in run.results]
    if retrieved_pairs:
        r_fail = retrieval_failure_value(gold, retrieved_pairs, weights)
    else:
        r_fail = 1.0  # nothing retrieved at all
    fragility, _ = prompt_fragility_value(question, corpus, strategy, gateway, weights)
    gen_anomaly = generation_anomaly_value(answer, run, corpus, gateway, weights)
    std_anomaly = standard_anomaly_value(answer.text, [c for c, _ in retrieved_pairs], gateway, weights)
    clean_answer = strip_citation_markers(answer.text) or answer.text
    corr = correctness(clean_answer, question.ground_truth) if question.ground_truth else 0.0
    relevance = topic_relevance(clean_answer, question, gateway)

    metrics = MetricVector(
        retrieval_failure=r_fail,
        prompt_fragility=fragility,
        generation_anomaly=gen_anomaly,
        standard_anomaly=std_anomaly,
        correctness=corr,
        topic_relevance=relevance,
    )
    return EvaluationRecord(
        question_id=question.id,
        retrieval_run=run,
        answer=answer,
        metrics=metrics,
        failure_weights=metrics.failure_weights(),
    )


def classify_failures(records: Sequence[EvaluationRecord], threshold: float = 0.5) -> dict[str, set[str]]:
    """Failure types whose metric meets the threshold, per question."""
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0,1)")
    out: dict[str, set[str]] = {}
    for record in records:
        types = {ftype for ftype, value in record.failure_weights.items() if value >= threshold}
        out[record.question_id] = types
    return out
