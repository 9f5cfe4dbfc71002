"""2-D projection of chunk embeddings, incremental query placement, grid
densities for the heatmap, and per-cell topic keywords.

The t-SNE here is the exact O(n^2) variant: conditional probabilities from a
per-point binary search on the Gaussian bandwidth, Student-t low-dimensional
affinities, early exaggeration and a momentum switch. Exactness is what makes
the KL-descent and determinism guarantees testable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, PerplexityTooLarge, TooFewPoints
from .gateway import Gateway
from .ingest import Corpus

DISPLAY_CAP = 20_000
_EPS = 1e-12

_WORD = re.compile(r"[A-Za-z][A-Za-z0-9'\-]*")
_SENTENCE_BOUNDARY = re.compile(r"[.!?]+")


# ---------------------------------------------------------------------------
# t-SNE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionState:
    base_points: tuple[tuple[str, float, float], ...]
    perplexity: float
    iterations: int
    seed: int
    kl_history: tuple[float, ...]
    base_embeddings: np.ndarray  # (n, D), frozen; needed for incremental placement

    def __post_init__(self):
        if any(not math.isfinite(v) for v in self.kl_history):
            raise ValueError("kl_history must be finite")

    def coordinates(self) -> np.ndarray:
        return np.asarray([(x, y) for _, x, y in self.base_points], dtype=np.float64)

    def points_json(self) -> list[dict]:
        return [{"id": cid, "x": x, "y": y} for cid, x, y in self.base_points]


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _conditional_probabilities(d2: np.ndarray, perplexity: float, steps: int = 50, tol: float = 1e-5) -> np.ndarray:
    """Row-wise Gaussian affinities whose entropy matches ln(perplexity),
    found by bisection on the precision beta."""
    n = d2.shape[0]
    target = math.log(perplexity)
    p = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        probs = np.full(n - 1, 1.0 / (n - 1))
        for _ in range(steps):
            logits = -row * beta
            logits -= logits.max()
            expd = np.exp(logits)
            total = expd.sum()
            if total <= 0.0:
                probs = np.full(n - 1, 1.0 / (n - 1))
                break
            probs = expd / total
            entropy = float(-(probs * np.log(np.maximum(probs, _EPS))).sum())
            if abs(entropy - target) < tol:
                break
            if entropy > target:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        p[i, np.arange(n) != i] = probs
    return p


def _joint_probabilities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    cond = _conditional_probabilities(d2, perplexity)
    joint = (cond + cond.T) / (2.0 * d2.shape[0])
    return np.maximum(joint, _EPS)


def _student_t_affinities(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return np.maximum(q, _EPS), num


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def fit_projection(
    corpus: Corpus,
    perplexity: float = 30.0,
    iterations: int = 750,
    seed: int = 0,
) -> ProjectionState:
    """Exact t-SNE over the corpus embeddings (capped at 20,000 points).

    Learning rate 200, momentum 0.5 switching to 0.8 at iteration 250, early
    exaggeration x12 for the first 250 iterations, Gaussian init with
    sigma=1e-4 from the given seed. KL against the true (un-exaggerated)
    joint distribution is recorded every 50 iterations.
    """
    chunks = corpus.chunks[:DISPLAY_CAP]
    n = len(chunks)
    if n < 3:
        raise TooFewPoints(f"projection needs at least 3 chunks, got {n}")
    if perplexity <= 0:
        raise ValueError("perplexity must be positive")
    if perplexity >= n:
        raise PerplexityTooLarge(f"perplexity {perplexity} must be smaller than the point count {n}")

    x = np.asarray([c.embedding for c in chunks], dtype=np.float64)
    p = _joint_probabilities(_squared_distances(x), perplexity)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)  # per-parameter gain adaptation, standard momentum GD
    exaggeration_until = 250
    momentum_switch = 250
    learning_rate = 200.0
    kl_history: list[float] = []

    for it in range(1, iterations + 1):
        p_eff = p * 12.0 if it <= exaggeration_until else p
        q, num = _student_t_affinities(y)
        g = (p_eff - q) * num
        grad = 4.0 * (np.diag(g.sum(axis=1)) - g) @ y
        momentum = 0.5 if it < momentum_switch else 0.8
        flipped = np.sign(grad) != np.sign(velocity)
        gains = np.where(flipped, gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * (gains * grad)
        y = y + velocity
        y = y - y.mean(axis=0)
        if it % 50 == 0 or it == iterations:
            q_true, _ = _student_t_affinities(y)
            kl_history.append(_kl_divergence(p, q_true))

    return ProjectionState(
        base_points=tuple((c.id, float(y[i, 0]), float(y[i, 1])) for i, c in enumerate(chunks)),
        perplexity=float(perplexity),
        iterations=int(iterations),
        seed=int(seed),
        kl_history=tuple(kl_history),
        base_embeddings=x,
    )


def project_incremental(
    state: ProjectionState,
    new_embeddings: Sequence[Sequence[float]],
    iterations: int = 50,
) -> list[tuple[float, float]]:
    """Place new points into the frozen projection.

    Each point starts at the similarity-weighted mean of its 10 nearest base
    points, with the perplexity-calibrated affinities as the similarity
    weights (raw cosine under-weights true neighbors through the heavy
    t-tail), then takes gradient steps on its own KL term against the fixed
    base layout. Base points are never touched.
    """
    if not len(new_embeddings):
        return []
    base_x = state.base_embeddings
    base_y = state.coordinates()
    n_base = base_x.shape[0]
    placed: list[tuple[float, float]] = []
    for vec in new_embeddings:
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (base_x.shape[1],):
            raise DimensionMismatch(f"new embedding has shape {v.shape}, base dimension is {base_x.shape[1]}")

        d2 = np.sum((base_x - v) ** 2, axis=1)
        p = _incremental_affinities(d2, min(state.perplexity, max(n_base - 1, 2)))
        nearest = np.argsort(d2, kind="stable")[: min(10, n_base)]
        weights = p[nearest]
        if weights.sum() <= 0.0:
            weights = np.ones_like(weights)
        y = (weights[:, None] * base_y[nearest]).sum(axis=0) / weights.sum()

        for _ in range(iterations):
            diff = y[None, :] - base_y
            w = 1.0 / (1.0 + np.sum(diff * diff, axis=1))
            q = w / w.sum()
            grad = 2.0 * (((p - q) * w)[:, None] * diff).sum(axis=0)
            y = y - 1.0 * grad
        placed.append((float(y[0]), float(y[1])))
    return placed


def _incremental_affinities(d2: np.ndarray, perplexity: float, steps: int = 50, tol: float = 1e-5) -> np.ndarray:
    target = math.log(max(perplexity, 2.0))
    beta, beta_min, beta_max = 1.0, -np.inf, np.inf
    probs = np.full(d2.shape[0], 1.0 / d2.shape[0])
    for _ in range(steps):
        logits = -d2 * beta
        logits -= logits.max()
        expd = np.exp(logits)
        total = expd.sum()
        if total <= 0.0:
            break
        probs = expd / total
        entropy = float(-(probs * np.log(np.maximum(probs, _EPS))).sum())
        if abs(entropy - target) < tol:
            break
        if entropy > target:
            beta_min = beta
            beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
        else:
            beta_max = beta
            beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
    return probs


# ---------------------------------------------------------------------------
# Grid densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridDensity:
    resolution: int
    cells: tuple[tuple[float, ...], ...]  # cells[row][col], row = y bin, col = x bin
    x_min: float = 0.0
    x_max: float = 0.0
    y_min: float = 0.0
    y_max: float = 0.0

    def total(self) -> float:
        return float(sum(sum(row) for row in self.cells))

    def cells_row_major(self) -> list[float]:
        return [v for row in self.cells for v in row]

    def to_json_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "cells": self.cells_row_major(),
            "bounds": {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max},
        }


def _bin_index(value: float, lo: float, hi: float, resolution: int) -> int:
    if hi <= lo:
        return 0
    idx = int((value - lo) / (hi - lo) * resolution)
    return min(max(idx, 0), resolution - 1)


def grid_density(state: ProjectionState, resolution: int = 200) -> GridDensity:
    """Point counts per cell over the base-point bounding box, normalized to sum 1."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    coords = state.coordinates()
    counts = np.zeros((resolution, resolution), dtype=np.float64)
    if coords.shape[0] == 0:
        return GridDensity(resolution=resolution, cells=tuple(tuple(row) for row in counts))
    x_min, y_min = coords.min(axis=0)
    x_max, y_max = coords.max(axis=0)
    for x, y in coords:
        col = _bin_index(x, x_min, x_max, resolution)
        row = _bin_index(y, y_min, y_max, resolution)
        counts[row, col] += 1.0
    cells = counts / coords.shape[0]
    return GridDensity(
        resolution=resolution,
        cells=tuple(tuple(float(v) for v in row) for row in cells),
        x_min=float(x_min),
        x_max=float(x_max),
        y_min=float(y_min),
        y_max=float(y_max),
    )


def grid_cell_of(state: ProjectionState, x: float, y: float, resolution: int = 200) -> tuple[int, int]:
    coords = state.coordinates()
    x_min, y_min = coords.min(axis=0)
    x_max, y_max = coords.max(axis=0)
    return (_bin_index(y, y_min, y_max, resolution), _bin_index(x, x_min, x_max, resolution))


# ---------------------------------------------------------------------------
# Entity extraction and per-cell topics
# ---------------------------------------------------------------------------

def _sentence_initial_offsets(text: str) -> set[int]:
    """Offsets of the first word after each sentence boundary. The very start
    of a text is NOT sentence-initial: chunk texts are arbitrary segments, so
    a leading capital carries entity evidence."""
    offsets = set()
    for m in _SENTENCE_BOUNDARY.finditer(text):
        w = _WORD.search(text, m.end())
        if w:
            offsets.add(w.start())
    return offsets


def entity_spans(text: str) -> list[tuple[str, int, int, bool]]:
    """Maximal runs of capitalized words: (lowercased entity, start, end,
    sentence_initial flag for the run's first word)."""
    words = [(m.group(), m.start(), m.end()) for m in _WORD.finditer(text)]
    initials = _sentence_initial_offsets(text)
    runs: list[tuple[str, int, int, bool]] = []
    i = 0
    while i < len(words):
        word, start, end = words[i]
        if not word[0].isupper():
            i += 1
            continue
        j = i
        run_end = end
        while (
            j + 1 < len(words)
            and words[j + 1][0][0].isupper()
            and text[words[j][2] : words[j + 1][1]].strip() == ""
        ):
            j += 1
            run_end = words[j][2]
        runs.append((text[start:run_end].lower(), start, run_end, start in initials))
        i = j + 1
    return runs


def extract_entities(texts: Sequence[str]) -> list[tuple[str, float]]:
    """TF-IDF-weighted entities across the texts.

    An entity qualifies if any of its occurrences is non-sentence-initial;
    weight = tf * ln(N / (1 + df)) + tf with tf the total occurrence count
    and df the number of texts containing the entity.
    """
    if not texts:
        return []
    n_texts = len(texts)
    tf: dict[str, int] = {}
    df: dict[str, set[int]] = {}
    qualified: set[str] = set()
    for t_idx, text in enumerate(texts):
        for entity, _, _, initial in entity_spans(text):
            tf[entity] = tf.get(entity, 0) + 1
            df.setdefault(entity, set()).add(t_idx)
            if not initial:
                qualified.add(entity)
    out = []
    for entity in qualified:
        weight = tf[entity] * math.log(n_texts / (1 + len(df[entity]))) + tf[entity]
        out.append((entity, float(weight)))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out


@dataclass(frozen=True)
class CellTopics:
    cell: tuple[int, int]
    keywords: tuple[tuple[str, float], ...]

    def __post_init__(self):
        scores = [s for _, s in self.keywords]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("keyword scores must be non-increasing")

    def to_json_dict(self) -> dict:
        return {
            "cell": {"i": self.cell[0], "j": self.cell[1]},
            "keywords": [{"term": t, "score": s} for t, s in self.keywords],
        }


def cell_topics(
    cell_chunk_texts: Sequence[str],
    candidate_topics: Sequence[str],
    gateway: Gateway,
    cell: tuple[int, int] = (0, 0),
    top_n: int = 5,
) -> CellTopics:
    """Rank candidate topics by entity-weighted embedding similarity.

    score(t) = sum over cell entities e of cos(embed(e), embed(t)) * weight(e).
    With no candidates the entities rank themselves.
    """
    if not cell_chunk_texts:
        raise ValueError("cell must contain at least one chunk text")
    entities = extract_entities(cell_chunk_texts)
    if not entities:
        return CellTopics(cell=cell, keywords=())
    candidates = list(candidate_topics) if candidate_topics else [e for e, _ in entities]
    unique_texts = list(dict.fromkeys([e for e, _ in entities] + candidates))
    vectors = gateway.embed(unique_texts)
    by_text = {t: np.asarray(v, dtype=np.float64) for t, v in zip(unique_texts, vectors)}
    scores = []
    for topic in candidates:
        tv = by_text[topic]
        tn = np.linalg.norm(tv)
        total = 0.0
        for entity, weight in entities:
            ev = by_text[entity]
            total += float(np.dot(ev, tv) / (np.linalg.norm(ev) * tn)) * weight
        scores.append((topic, total))
    scores.sort(key=lambda pair: (-pair[1], pair[0]))
    return CellTopics(cell=cell, keywords=tuple(scores[:top_n]))


def projection_export(state: ProjectionState, grid: Optional[GridDensity] = None, resolution: int = 200) -> dict:
    """The JSON wire format: points, row-major grid and KL history."""
    grid = grid or grid_density(state, resolution)
    return {
        "points": state.points_json(),
        "grid": grid.to_json_dict(),
        "kl_history": list(state.kl_history),
    }
