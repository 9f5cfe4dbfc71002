import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ragtrace import Chunk, MetricWeights, MockGateway, Question, validate_weights
from ragtrace.ingest import Corpus


@pytest.fixture
def gateway():
    return MockGateway()


@pytest.fixture
def weights():
    return validate_weights(MetricWeights())


def make_chunk(cid, text, embedding, source="doc", position=0):
    return Chunk(id=cid, text=text, source_doc=source, position=position, embedding=tuple(embedding))


def embedded_corpus(texts, gateway, source="doc"):
    """Corpus whose chunk embeddings come from the mock gateway."""
    vectors = gateway.embed(list(texts))
    chunks = [
        make_chunk(f"c{i}", text, vec, source=source, position=i)
        for i, (text, vec) in enumerate(zip(texts, vectors))
    ]
    return Corpus(chunks, dimension=gateway.dimension, embedder_id="mock:test", created_at="2026-01-01T00:00:00Z")


def random_unit_vectors(rng, n, dim):
    vecs = rng.standard_normal((n, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


@pytest.fixture
def tiny_corpus(gateway):
    texts = [
        "The red fox sleeps in the meadow near the river",
        "Quantum processors require cryogenic cooling to operate",
        "The harbor stores grain for the winter months",
        "Solar panels convert sunlight into electricity efficiently",
        "Ancient maps chart the coastline of the northern sea",
    ]
    return embedded_corpus(texts, gateway)


@pytest.fixture
def question_with_truth():
    return Question(id="q1", text="where does the red fox sleep?", ground_truth="The red fox sleeps in the meadow")
