"""Diagnostics engine for retrieval-augmented generation workflows."""

from .core import (
    FAILURE_TYPES,
    METRIC_AXES,
    Chunk,
    MetricVector,
    MetricWeights,
    Question,
    canonical_json,
    validate_weights,
)
from .gateway import GenerationResult, JudgeVerdict, MockGateway, make_gateway
from .ingest import ChunkingConfig, Corpus, chunk_document, embed_chunks, ingest_documents, load_corpus, save_corpus, top_k
from .retrieval import ChunkRelinkData, RetrievalRun, RetrievalStrategy, build_chunk_relink, classify_relevance, retrieve
from .diagnostics import (
    EvaluationRecord,
    classify_failures,
    correctness,
    evaluate_question,
    generation_anomaly_value,
    prompt_fragility_value,
    retrieval_failure_value,
    standard_anomaly_value,
    topic_relevance,
)
from .projection import CellTopics, GridDensity, ProjectionState, cell_topics, extract_entities, fit_projection, grid_density, project_incremental
from .evidence import AnnotatedAnswer, EntityLexicon, EvidenceGraph, annotate_answer, build_evidence_graph, compare_entity_sets, expand_entity, verify_citation
from .experiment import ExperimentRun, RunStore, SamplingConfig, execute_run, radar_data, sample_questions

__version__ = "0.1.0"
