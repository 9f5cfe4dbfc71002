"""Corpus ingestion: chunking, embedding, exact vector search and persistence.

The index is a flat exact scan over contiguous float32 storage; top_k's
contract (exact cosine, deterministic ties) would survive a swap for an
approximate index, but none is provided at desk scale.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Chunk
from .errors import (
    DimensionMismatch,
    EmptyDocument,
    FormatVersionMismatch,
    GatewayError,
    IoError,
    ZeroNormEmbedding,
)
from .gateway import Gateway

FORMAT_VERSION = 1

_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")


def utc_now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class ChunkingConfig:
    """Sliding-window chunking over whitespace tokens."""

    max_tokens: int = 256
    overlap_tokens: int = 32
    split_on: str = "paragraph_then_window"  # or "fixed_window"

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.overlap_tokens < 0 or self.overlap_tokens >= self.max_tokens:
            raise ValueError("overlap_tokens must satisfy 0 <= overlap < max_tokens")
        if self.split_on not in ("paragraph_then_window", "fixed_window"):
            raise ValueError(f"unknown split_on {self.split_on!r}")

    def to_json_dict(self) -> dict:
        return {
            "max_tokens": self.max_tokens,
            "overlap_tokens": self.overlap_tokens,
            "split_on": self.split_on,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChunkingConfig":
        return cls(max_tokens=d["max_tokens"], overlap_tokens=d["overlap_tokens"], split_on=d["split_on"])


class Corpus:
    """Immutable indexed corpus: chunk list plus a contiguous embedding matrix."""

    def __init__(self, chunks: Sequence[Chunk], dimension: int, embedder_id: str, created_at: Optional[str] = None):
        chunks = list(chunks)
        ids = set()
        for c in chunks:
            if c.id in ids:
                raise ValueError(f"duplicate chunk id {c.id!r}")
            ids.add(c.id)
            if c.embedding is None:
                raise ValueError(f"chunk {c.id!r} has no embedding")
            if len(c.embedding) != dimension:
                raise DimensionMismatch(f"chunk {c.id!r} has dimension {len(c.embedding)}, corpus has {dimension}")
        self.chunks: tuple[Chunk, ...] = tuple(chunks)
        self.dimension = dimension
        self.embedder_id = embedder_id
        self.created_at = created_at or utc_now_iso()
        self._by_id = {c.id: c for c in self.chunks}
        if chunks:
            self._matrix = np.asarray([c.embedding for c in chunks], dtype=np.float64)
            norms = np.linalg.norm(self._matrix, axis=1)
            if np.any(norms == 0.0):
                bad = self.chunks[int(np.argmin(norms))].id
                raise ZeroNormEmbedding(f"chunk {bad!r} has zero-norm embedding; cosine undefined")
            self._norms = norms
        else:
            self._matrix = np.zeros((0, dimension), dtype=np.float64)
            self._norms = np.zeros(0, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.chunks)

    def get(self, chunk_id: str) -> Optional[Chunk]:
        return self._by_id.get(chunk_id)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for c in self.chunks:
            h.update(c.id.encode("utf-8"))
        h.update(str(self.dimension).encode())
        return h.hexdigest()[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.chunks == other.chunks
            and self.dimension == other.dimension
            and self.embedder_id == other.embedder_id
            and self.created_at == other.created_at
        )


def chunk_id_for(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _windows(tokens: list[str], cfg: ChunkingConfig) -> list[list[str]]:
    if len(tokens) <= cfg.max_tokens:
        return [tokens]
    stride = cfg.max_tokens - cfg.overlap_tokens
    out = []
    start = 0
    while start < len(tokens):
        out.append(tokens[start : start + cfg.max_tokens])
        if start + cfg.max_tokens >= len(tokens):
            break
        start += stride
    return out


def chunk_document(doc_text: str, source_doc: str, cfg: ChunkingConfig = ChunkingConfig()) -> list[Chunk]:
    """Split a document into chunks of at most max_tokens whitespace tokens.

    Dropping each chunk's leading overlap reconstructs the document's token
    sequence exactly. Ids are derived from chunk text (with a deterministic
    suffix for repeated text) so re-ingestion is stable.
    """
    if not doc_text or not doc_text.strip():
        raise EmptyDocument(f"document {source_doc!r} is empty")

    if cfg.split_on == "fixed_window":
        token_groups = _windows(doc_text.split(), cfg)
    else:
        # Greedily merge whole paragraphs up to max_tokens, windowing any
        # paragraph that alone exceeds the limit.
        token_groups = []
        buffer: list[str] = []
        for para in _PARAGRAPH_SPLIT.split(doc_text):
            tokens = para.split()
            if not tokens:
                continue
            if len(tokens) > cfg.max_tokens:
                if buffer:
                    token_groups.append(buffer)
                    buffer = []
                token_groups.extend(_windows(tokens, cfg))
            elif len(buffer) + len(tokens) <= cfg.max_tokens:
                buffer.extend(tokens)
            else:
                token_groups.append(buffer)
                buffer = tokens
        if buffer:
            token_groups.append(buffer)

    chunks: list[Chunk] = []
    seen: dict[str, int] = {}
    for position, tokens in enumerate(token_groups):
        text = " ".join(tokens)
        cid = chunk_id_for(text)
        dup = seen.get(cid)
        seen[cid] = (dup or 0) + 1
        if dup:
            cid = f"{cid}-{dup}"
        chunks.append(Chunk(id=cid, text=text, source_doc=source_doc, position=position))
    return chunks


def embed_chunks(
    chunks: Sequence[Chunk],
    gateway: Gateway,
    batch_size: int = 64,
    clock: Optional[Callable[[], str]] = None,
) -> Corpus:
    """Attach gateway embeddings to chunks, preserving order, and build a Corpus."""
    dimension = gateway.embedding_dimension()
    embedded: list[Chunk] = []
    for lo in range(0, len(chunks), batch_size):
        batch = list(chunks[lo : lo + batch_size])
        try:
            vectors = gateway.embed([c.text for c in batch])
        except GatewayError as exc:
            raise GatewayError(f"embedding batch [{lo}:{lo + len(batch)}) failed: {exc}") from exc
        for chunk, vec in zip(batch, vectors):
            if len(vec) != dimension:
                raise DimensionMismatch(
                    f"gateway returned dimension {len(vec)} for chunk {chunk.id!r}, expected {dimension}"
                )
            # Quantize to float32 at ingest: the persisted format is float32,
            # so round-tripping a corpus stays bit-exact.
            embedded.append(
                Chunk(
                    id=chunk.id,
                    text=chunk.text,
                    source_doc=chunk.source_doc,
                    position=chunk.position,
                    embedding=tuple(float(v) for v in np.asarray(vec, dtype=np.float32)),
                )
            )
    created = clock() if clock is not None else None
    return Corpus(embedded, dimension=dimension, embedder_id=f"{gateway.config.backend}:{gateway.config.embed_model}", created_at=created)


def top_k(corpus: Corpus, query_embedding: Sequence[float], k: int) -> list[tuple[Chunk, float]]:
    """Exact top-k by cosine similarity, ties broken by chunk id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query_embedding, dtype=np.float64)
    if query.shape != (corpus.dimension,):
        raise DimensionMismatch(f"query has dimension {query.shape}, corpus has {corpus.dimension}")
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        raise ZeroNormEmbedding("query embedding has zero norm")
    if len(corpus) == 0:
        return []
    sims = (corpus.matrix @ query) / (corpus._norms * qnorm)
    order = sorted(range(len(corpus)), key=lambda i: (-sims[i], corpus.chunks[i].id))
    return [(corpus.chunks[i], float(sims[i])) for i in order[: min(k, len(corpus))]]


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Persist as manifest.json + chunks.jsonl + float32 embeddings.bin."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": FORMAT_VERSION,
        "dimension": corpus.dimension,
        "embedder_id": corpus.embedder_id,
        "created_at": corpus.created_at,
        "count": len(corpus),
    }
    try:
        (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
        with (root / "chunks.jsonl").open("w", encoding="utf-8") as fh:
            for c in corpus.chunks:
                row = {"id": c.id, "text": c.text, "source_doc": c.source_doc, "position": c.position}
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        matrix = corpus.matrix.astype("<f4")
        (root / "embeddings.bin").write_bytes(matrix.tobytes(order="C"))
    except OSError as exc:
        raise IoError(f"writing corpus to {root}: {exc}") from exc


def load_corpus(path: str | Path) -> Corpus:
    root = Path(path)
    try:
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        chunk_lines = (root / "chunks.jsonl").read_text(encoding="utf-8").splitlines()
        blob = (root / "embeddings.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"reading corpus from {root}: {exc}") from exc
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatVersionMismatch(f"corpus format version {manifest.get('version')!r}, expected {FORMAT_VERSION}")
    dimension = int(manifest["dimension"])
    rows = [json.loads(line) for line in chunk_lines if line.strip()]
    expected_bytes = len(rows) * dimension * 4
    if len(blob) != expected_bytes:
        raise IoError(f"embeddings.bin has {len(blob)} bytes, expected {expected_bytes}")
    matrix = np.frombuffer(blob, dtype="<f4").reshape(len(rows), dimension)
    chunks = [
        Chunk(
            id=row["id"],
            text=row["text"],
            source_doc=row["source_doc"],
            position=int(row["position"]),
            embedding=tuple(float(v) for v in matrix[i]),
        )
        for i, row in enumerate(rows)
    ]
    return Corpus(chunks, dimension=dimension, embedder_id=manifest["embedder_id"], created_at=manifest["created_at"])


def read_documents_jsonl(path: str | Path) -> list[tuple[str, str]]:
    """Parse a corpus input file: one {"doc_id", "text"} object per line."""
    out = []
    try:
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "doc_id" not in row or "text" not in row:
                raise IoError(f"{path}:{lineno}: document rows need doc_id and text")
            out.append((row["doc_id"], row["text"]))
    except OSError as exc:
        raise IoError(f"reading {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"parsing {path}: {exc}") from exc
    return out


def ingest_documents(
    documents: Sequence[tuple[str, str]],
    gateway: Gateway,
    cfg: ChunkingConfig = ChunkingConfig(),
    clock: Optional[Callable[[], str]] = None,
) -> Corpus:
    """chunk_document + embed_chunks over a document list, deduplicating ids globally."""
    all_chunks: list[Chunk] = []
    seen: dict[str, int] = {}
    for doc_id, text in documents:
        for chunk in chunk_document(text, doc_id, cfg):
            base = chunk_id_for(chunk.text)
            dup = seen.get(base, 0)
            seen[base] = dup + 1
            cid = base if dup == 0 else f"{base}-{dup}"
            all_chunks.append(Chunk(id=cid, text=chunk.text, source_doc=chunk.source_doc, position=chunk.position))
    return embed_chunks(all_chunks, gateway, clock=clock)
