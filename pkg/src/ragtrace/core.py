"""Shared domain types and metric-weight configuration.

Every type here is an immutable value object with a canonical JSON encoding
(lower_snake_case field names, sorted keys, compact separators) so that
serialization round-trips are byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Any, Optional

from .errors import ThetaOutOfRange, WeightSumViolation

FAILURE_TYPES = (
    "retrieval_failure",
    "prompt_vulnerability",
    "generation_anomaly",
    "standard_inconsistency",
)

METRIC_AXES = (
    "retrieval_failure",
    "prompt_fragility",
    "generation_anomaly",
    "standard_anomaly",
    "correctness",
    "topic_relevance",
)

# Metric field -> failure type shown in the force-graph.
METRIC_TO_FAILURE = {
    "retrieval_failure": "retrieval_failure",
    "prompt_fragility": "prompt_vulnerability",
    "generation_anomaly": "generation_anomaly",
    "standard_anomaly": "standard_inconsistency",
}


def canonical_json(obj: Any) -> str:
    """Serialize to canonical JSON: sorted keys, compact, no NaN/inf."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _require_range(name: str, value: float, lo: float, hi: float) -> float:
    value = _require_finite(name, value)
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value!r}")
    return value


@dataclass(frozen=True)
class Chunk:
    """A text segment with its embedding: the unit of retrieval and indexing.

    ``embedding`` is None until the chunk has passed through an embedding
    gateway. Ids are content-hash derived so that identical chunks retrieved
    by different strategies unify in comparison views.
    """

    id: str
    text: str
    source_doc: str
    position: int
    embedding: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("chunk text must be non-empty")
        if self.position < 0:
            raise ValueError("chunk position must be >= 0")
        if self.embedding is not None:
            object.__setattr__(self, "embedding", tuple(float(v) for v in self.embedding))

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "source_doc": self.source_doc,
            "position": self.position,
            "embedding": list(self.embedding) if self.embedding is not None else None,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Chunk":
        emb = d.get("embedding")
        return cls(
            id=d["id"],
            text=d["text"],
            source_doc=d["source_doc"],
            position=int(d["position"]),
            embedding=tuple(emb) if emb is not None else None,
        )


@dataclass(frozen=True)
class Question:
    """An evaluation unit: query text plus optional gold annotations."""

    id: str
    text: str
    ground_truth: Optional[str] = None
    gold_chunk_ids: Optional[frozenset[str]] = None
    tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.text:
            raise ValueError("question text must be non-empty")
        if self.gold_chunk_ids is not None:
            object.__setattr__(self, "gold_chunk_ids", frozenset(self.gold_chunk_ids))
        object.__setattr__(self, "tags", frozenset(self.tags))

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "ground_truth": self.ground_truth,
            "gold_chunk_ids": sorted(self.gold_chunk_ids) if self.gold_chunk_ids is not None else None,
            "tags": sorted(self.tags),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Question":
        gold = d.get("gold_chunk_ids")
        return cls(
            id=d["id"],
            text=d["text"],
            ground_truth=d.get("ground_truth"),
            gold_chunk_ids=frozenset(gold) if gold is not None else None,
            tags=frozenset(d.get("tags") or ()),
        )


@dataclass(frozen=True)
class MetricWeights:
    """Weights, thresholds and sizes shared by all diagnostic metrics.

    The three alpha/beta pairs must each sum to 1; theta is the similarity
    threshold used by hit tests and relevance classification.
    """

    alpha_retrieval: float = 0.5
    beta_retrieval: float = 0.5
    theta: float = 0.8
    alpha_gen: float = 0.5
    beta_gen: float = 0.5
    alpha_std: float = 0.4
    beta_std: float = 0.6
    m_variations: int = 3
    k_retrieve: int = 10

    def to_json_dict(self) -> dict:
        return {
            "alpha_retrieval": self.alpha_retrieval,
            "beta_retrieval": self.beta_retrieval,
            "theta": self.theta,
            "alpha_gen": self.alpha_gen,
            "beta_gen": self.beta_gen,
            "alpha_std": self.alpha_std,
            "beta_std": self.beta_std,
            "m_variations": self.m_variations,
            "k_retrieve": self.k_retrieve,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricWeights":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def validate_weights(w: MetricWeights) -> MetricWeights:
    """Check the invariants of a MetricWeights; return it unchanged if valid."""
    for pair, total in (
        ("alpha_retrieval+beta_retrieval", w.alpha_retrieval + w.beta_retrieval),
        ("alpha_gen+beta_gen", w.alpha_gen + w.beta_gen),
        ("alpha_std+beta_std", w.alpha_std + w.beta_std),
    ):
        if abs(total - 1.0) > 1e-9:
            raise WeightSumViolation(pair, total)
    if not (0.0 < w.theta < 1.0):
        raise ThetaOutOfRange(w.theta)
    for name in ("alpha_retrieval", "beta_retrieval", "alpha_gen", "beta_gen", "alpha_std", "beta_std"):
        _require_range(name, getattr(w, name), 0.0, 1.0)
    if w.m_variations < 2:
        raise ValueError(f"m_variations must be >= 2, got {w.m_variations}")
    if w.k_retrieve < 1:
        raise ValueError(f"k_retrieve must be >= 1, got {w.k_retrieve}")
    return w


@dataclass(frozen=True)
class MetricVector:
    """The six per-question metric values on a common scale.

    All diagnostic metrics live in [0,1]; topic_relevance is a raw cosine
    in [-1,1]. Construction rejects NaN and out-of-range values.
    """

    retrieval_failure: float
    prompt_fragility: float
    generation_anomaly: float
    standard_anomaly: float
    correctness: float
    topic_relevance: float

    def __post_init__(self):
        for name in ("retrieval_failure", "prompt_fragility", "generation_anomaly", "standard_anomaly", "correctness"):
            object.__setattr__(self, name, _require_range(name, getattr(self, name), 0.0, 1.0))
        object.__setattr__(self, "topic_relevance", _require_range("topic_relevance", self.topic_relevance, -1.0, 1.0))

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_AXES}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricVector":
        return cls(**{name: d[name] for name in METRIC_AXES})

    @classmethod
    def zeros(cls) -> "MetricVector":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def failure_weights(self) -> dict[str, float]:
        """Map each failure type to its metric value (force-graph attraction)."""
        return {ftype: getattr(self, metric) for metric, ftype in METRIC_TO_FAILURE.items()}
