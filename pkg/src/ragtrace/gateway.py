"""Uniform client layer for chat generation, embeddings, confidence and judge calls.

Two backends share one interface: an OpenAI-compatible HTTP client and a
deterministic mock. The mock is a pure function of its inputs, which is what
makes golden-file tests possible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Chunk
from .errors import ConfidenceUnavailable, GatewayError, GatewayTimeout

CITATION_PATTERN = re.compile(r"\[chunk:([A-Za-z0-9_\-]+)\]")

HEDGE_WORDS = frozenset({"might", "possibly", "unclear", "perhaps", "may"})

DEFAULT_UNCERTAINTY_PROMPT = (
    "Rate how uncertain or hedged the following answer sounds on a scale from 0 "
    "(fully certain) to 100 (completely uncertain). Reply with a single integer.\n\n"
    "Answer:\n{answer}"
)
DEFAULT_FACT_SUPPORT_PROMPT = (
    "Given the evidence passages below, estimate the probability (0 to 100) that "
    "the claim is supported by them. Reply with a single integer.\n\n"
    "Claim: {claim}\n\nEvidence:\n{evidence}"
)
DEFAULT_EXPAND_PROMPT = (
    'For the entity "{entity}" in the context below, list contextual synonyms and '
    'antonyms. Reply with JSON {{"synonyms": [...], "antonyms": [...]}} only.\n\n'
    "Context:\n{context}"
)
SELF_REPORT_SUFFIX = (
    "\n\nAfter your answer, on a new final line write CONFIDENCE: <integer 0-100> "
    "giving your confidence in the answer."
)


@dataclass(frozen=True)
class GenerationResult:
    """One chat completion with confidence signals and parsed citations."""

    text: str
    mean_confidence: float
    token_confidences: Optional[tuple[float, ...]] = None
    citations: tuple[str, ...] = ()
    raw_usage: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.mean_confidence <= 1.0):
            raise ValueError(f"mean_confidence out of range: {self.mean_confidence!r}")
        if self.token_confidences is not None:
            tc = tuple(float(v) for v in self.token_confidences)
            object.__setattr__(self, "token_confidences", tc)
            if tc:
                mean = sum(tc) / len(tc)
                if abs(mean - self.mean_confidence) > 1e-6:
                    raise ValueError("mean_confidence does not match token_confidences mean")
        object.__setattr__(self, "citations", tuple(self.citations))

    def to_json_dict(self) -> dict:
        return {
            "text": self.text,
            "mean_confidence": self.mean_confidence,
            "token_confidences": list(self.token_confidences) if self.token_confidences is not None else None,
            "citations": list(self.citations),
            "raw_usage": dict(self.raw_usage),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GenerationResult":
        tc = d.get("token_confidences")
        return cls(
            text=d["text"],
            mean_confidence=d["mean_confidence"],
            token_confidences=tuple(tc) if tc is not None else None,
            citations=tuple(d.get("citations") or ()),
            raw_usage=dict(d.get("raw_usage") or {}),
        )


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    rationale: str = ""

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"judge score out of range: {self.score!r}")


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "mock"
    api_base: str = ""
    api_key: str = ""
    embed_model: str = "text-embedding-3-large"
    chat_model: str = "gpt-4o-mini"
    max_concurrency: int = 4
    max_retries: int = 2
    retry_backoff_s: float = 0.25
    timeout_s: float = 30.0
    mock_dimension: int = 64
    uncertainty_prompt: str = DEFAULT_UNCERTAINTY_PROMPT
    fact_support_prompt: str = DEFAULT_FACT_SUPPORT_PROMPT
    expand_prompt: str = DEFAULT_EXPAND_PROMPT

    @classmethod
    def from_env(cls, backend: Optional[str] = None, **overrides) -> "GatewayConfig":
        kwargs = dict(
            api_base=os.environ.get("RAGTRACE_API_BASE", ""),
            api_key=os.environ.get("RAGTRACE_API_KEY", ""),
            embed_model=os.environ.get("RAGTRACE_EMBED_MODEL", cls.embed_model),
            chat_model=os.environ.get("RAGTRACE_CHAT_MODEL", cls.chat_model),
        )
        if backend is not None:
            kwargs["backend"] = backend
        kwargs.update(overrides)
        return cls(**kwargs)


def build_context_prompt(prompt: str, context_chunks: Sequence[Chunk]) -> str:
    """Assemble the full prompt sent to the backend.

    Each chunk is listed as "[chunk:<id>] <text>" and the model is told to
    cite the ids of chunks it uses with the same literal syntax.
    """
    if not context_chunks:
        return prompt
    lines = [f"[chunk:{c.id}] {c.text}" for c in context_chunks]
    return (
        "Use the context chunks below to answer. Cite every chunk you rely on by "
        "repeating its bracketed tag inline in your answer.\n\n"
        + "\n".join(lines)
        + "\n\nQuestion: "
        + prompt
    )


def parse_citations(text: str) -> tuple[str, ...]:
    """All chunk ids cited in the text, in order of first appearance."""
    seen: list[str] = []
    for m in CITATION_PATTERN.finditer(text):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return tuple(seen)


def _hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class Gateway:
    """Base gateway: concurrency cap plus retry-with-backoff around backend calls."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    # -- public operations ------------------------------------------------

    def generate(self, prompt: str, context_chunks: Sequence[Chunk] = (), diversity: float = 0.0) -> GenerationResult:
        if not prompt:
            raise GatewayError("prompt must be non-empty")
        if not (0.0 <= diversity <= 2.0):
            raise GatewayError(f"diversity out of range [0,2]: {diversity!r}")
        full_prompt = build_context_prompt(prompt, context_chunks)
        return self._call(self._generate_impl, full_prompt, diversity)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        for t in texts:
            if not t:
                raise GatewayError("cannot embed empty text")
        if not texts:
            return []
        return self._call(self._embed_impl, list(texts))

    def judge_uncertainty(self, answer: str) -> JudgeVerdict:
        if not answer:
            raise GatewayError("answer must be non-empty")
        return self._call(self._judge_uncertainty_impl, answer)

    def judge_fact_support(self, claim: str, evidence: Sequence[Chunk]) -> JudgeVerdict:
        if not claim:
            raise GatewayError("claim must be non-empty")
        if not evidence:
            return JudgeVerdict(score=0.0, rationale="no evidence supplied")
        return self._call(self._judge_fact_support_impl, claim, list(evidence))

    def expand_entity(self, entity: str, context: str) -> tuple[set[str], set[str]]:
        if not entity:
            raise GatewayError("entity must be non-empty")
        return self._call(self._expand_entity_impl, entity, context)

    def embedding_dimension(self) -> int:
        return len(self.embed(["dimension probe"])[0])

    # -- plumbing ----------------------------------------------------------

    def _call(self, impl, *args):
        deadline = time.monotonic() + self.config.timeout_s
        attempt = 0
        with self._slots:
            while True:
                try:
                    return impl(*args)
                except GatewayError:
                    attempt += 1
                    if attempt > self.config.max_retries:
                        raise
                    delay = self.config.retry_backoff_s * (2 ** (attempt - 1))
                    if time.monotonic() + delay > deadline:
                        raise GatewayTimeout(f"gateway deadline of {self.config.timeout_s}s exceeded")
                    time.sleep(delay)

    def _generate_impl(self, full_prompt: str, diversity: float) -> GenerationResult:
        raise NotImplementedError

    def _embed_impl(self, texts: list[str]) -> list[np.ndarray]:
        raise NotImplementedError

    def _judge_uncertainty_impl(self, answer: str) -> JudgeVerdict:
        raise NotImplementedError

    def _judge_fact_support_impl(self, claim: str, evidence: list[Chunk]) -> JudgeVerdict:
        raise NotImplementedError

    def _expand_entity_impl(self, entity: str, context: str) -> tuple[set[str], set[str]]:
        raise NotImplementedError


_MOCK_WORDS = (
    "signal", "harbor", "lattice", "meadow", "cobalt", "ember", "quartz", "drift",
    "prism", "anchor", "velvet", "orbit", "cipher", "tundra", "mosaic", "beacon",
)


class MockGateway(Gateway):
    """Deterministic stand-in backend.

    Every operation is a pure function of its inputs: embeddings are hash-seeded
    pseudo-random unit vectors, generation is a hash-derived template citing the
    top context chunks, and both judges follow fixed lexical rules. Call counts
    per operation are tracked for cache tests.
    """

    def __init__(self, config: GatewayConfig | None = None, dimension: int | None = None):
        cfg = config or GatewayConfig(backend="mock")
        if dimension is not None:
            cfg = dataclasses.replace(cfg, mock_dimension=dimension)
        super().__init__(cfg)
        self.dimension = cfg.mock_dimension
        self.call_counts: dict[str, int] = {}
        self._count_lock = threading.Lock()

    def _count(self, op: str) -> None:
        with self._count_lock:
            self.call_counts[op] = self.call_counts.get(op, 0) + 1

    def embedding_dimension(self) -> int:
        return self.dimension

    def _embed_impl(self, texts: list[str]) -> list[np.ndarray]:
        self._count("embed")
        out = []
        for text in texts:
            rng = np.random.default_rng(_hash64(text))
            vec = rng.standard_normal(self.dimension)
            vec /= np.linalg.norm(vec)
            out.append(vec)
        return out

    def _generate_impl(self, full_prompt: str, diversity: float) -> GenerationResult:
        self._count("generate")
        seed = _hash64(f"{full_prompt}|d={diversity:.6f}")
        rng = np.random.default_rng(seed)
        context_lines = re.findall(r"^\[chunk:([A-Za-z0-9_\-]+)\] (.*)$", full_prompt, re.MULTILINE)
        if context_lines:
            # Echo the top chunks so downstream fact checks have something to bite on.
            top_id, top_text = context_lines[0]
            snippet = " ".join(top_text.split()[:24])
            text = f"{snippet} [chunk:{top_id}]."
            if len(context_lines) > 1:
                second_id, second_text = context_lines[1]
                second_snippet = " ".join(second_text.split()[:12])
                text += f" {second_snippet} [chunk:{second_id}]."
        else:
            words = " ".join(_MOCK_WORDS[i] for i in rng.integers(0, len(_MOCK_WORDS), size=8))
            text = f"Hypothetical answer {seed:016x}: {words}."
        token_confidences = tuple(float(v) for v in rng.uniform(0.55, 0.95, size=len(text.split())))
        mean_confidence = float(sum(token_confidences) / len(token_confidences))
        return GenerationResult(
            text=text,
            mean_confidence=mean_confidence,
            token_confidences=token_confidences,
            citations=parse_citations(text),
            raw_usage={
                "prompt_tokens": len(full_prompt.split()),
                "completion_tokens": len(text.split()),
            },
        )

    def _judge_uncertainty_impl(self, answer: str) -> JudgeVerdict:
        self._count("judge_uncertainty")
        tokens = re.findall(r"\w+|[^\w\s]", answer)
        if not tokens:
            return JudgeVerdict(score=0.0, rationale="empty after tokenization")
        hedges = sum(1 for t in tokens if t.lower() in HEDGE_WORDS)
        score = min(1.0, hedges / len(tokens))
        return JudgeVerdict(score=score, rationale=f"{hedges} hedge tokens of {len(tokens)}")

    def _judge_fact_support_impl(self, claim: str, evidence: list[Chunk]) -> JudgeVerdict:
        self._count("judge_fact_support")
        needle = claim.lower()
        for chunk in evidence:
            if needle in chunk.text.lower():
                return JudgeVerdict(score=1.0, rationale=f"claim found verbatim in {chunk.id}")
        return JudgeVerdict(score=0.0, rationale="claim not found in evidence")

    def _expand_entity_impl(self, entity: str, context: str) -> tuple[set[str], set[str]]:
        self._count("expand_entity")
        return {f"{entity}_syn"}, {f"{entity}_ant"}


class OpenAICompatibleGateway(Gateway):
    """Client for any OpenAI-compatible HTTP backend (chat + embeddings).

    Confidence uses token logprobs when the backend returns them (geometric
    mean via exp(mean log p)); otherwise a self-report suffix asks the model
    for a 0-100 confidence integer.
    """

    def __init__(self, config: GatewayConfig, client=None):
        super().__init__(config)
        if not config.api_base:
            raise GatewayError("openai_compatible backend requires RAGTRACE_API_BASE")
        import httpx

        self._client = client or httpx.Client(
            base_url=config.api_base.rstrip("/"),
            headers={"Authorization": f"Bearer {config.api_key}"} if config.api_key else {},
            timeout=config.timeout_s,
        )

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        try:
            resp = self._client.post(path, json=payload)
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise GatewayError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise GatewayError(f"backend returned {resp.status_code}: {resp.text[:500]}")
        return resp.json()

    def _chat(self, prompt: str, temperature: float, logprobs: bool) -> dict:
        payload = {
            "model": self.config.chat_model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        if logprobs:
            payload["logprobs"] = True
        return self._post("/chat/completions", payload)

    def _generate_impl(self, full_prompt: str, diversity: float) -> GenerationResult:
        data = self._chat(full_prompt, temperature=diversity, logprobs=True)
        choice = data["choices"][0]
        text = choice["message"]["content"]
        usage = data.get("usage", {})
        token_logprobs = None
        logprobs = choice.get("logprobs")
        if logprobs and logprobs.get("content"):
            token_logprobs = [t["logprob"] for t in logprobs["content"]]
        if token_logprobs:
            token_confidences = tuple(math.exp(lp) for lp in token_logprobs)
            mean_confidence = math.exp(sum(token_logprobs) / len(token_logprobs))
            return GenerationResult(
                text=text,
                mean_confidence=min(1.0, mean_confidence),
                token_confidences=None,  # geometric aggregation; raw probs kept out of the mean invariant
                citations=parse_citations(text),
                raw_usage=dict(usage) | {"token_confidences": list(token_confidences)},
            )
        # No logprobs: re-ask with a self-report suffix.
        data2 = self._chat(full_prompt + SELF_REPORT_SUFFIX, temperature=diversity, logprobs=False)
        text2 = data2["choices"][0]["message"]["content"]
        confidence, body = self._split_self_report(text2)
        if confidence is None:
            raise ConfidenceUnavailable("backend exposes no logprobs and self-report parse failed")
        return GenerationResult(
            text=body,
            mean_confidence=confidence,
            token_confidences=None,
            citations=parse_citations(body),
            raw_usage=dict(data2.get("usage", {})),
        )

    @staticmethod
    def _split_self_report(text: str) -> tuple[Optional[float], str]:
        m = re.search(r"CONFIDENCE:\s*(\d{1,3})\s*$", text.strip())
        if not m:
            return None, text
        value = min(100, int(m.group(1))) / 100.0
        return value, text[: m.start()].rstrip()

    def _embed_impl(self, texts: list[str]) -> list[np.ndarray]:
        data = self._post("/embeddings", {"model": self.config.embed_model, "input": texts})
        rows = sorted(data["data"], key=lambda r: r["index"])
        return [np.asarray(r["embedding"], dtype=np.float64) for r in rows]

    def _judge_score(self, prompt: str) -> JudgeVerdict:
        data = self._chat(prompt, temperature=0.0, logprobs=False)
        text = data["choices"][0]["message"]["content"].strip()
        m = re.search(r"\d{1,3}", text)
        if not m:
            raise GatewayError(f"judge returned no score: {text[:200]}")
        return JudgeVerdict(score=min(100, int(m.group())) / 100.0, rationale=text)

    def _judge_uncertainty_impl(self, answer: str) -> JudgeVerdict:
        return self._judge_score(self.config.uncertainty_prompt.format(answer=answer))

    def _judge_fact_support_impl(self, claim: str, evidence: list[Chunk]) -> JudgeVerdict:
        evidence_text = "\n".join(f"- {c.text}" for c in evidence)
        return self._judge_score(self.config.fact_support_prompt.format(claim=claim, evidence=evidence_text))

    def _expand_entity_impl(self, entity: str, context: str) -> tuple[set[str], set[str]]:
        data = self._chat(self.config.expand_prompt.format(entity=entity, context=context), 0.0, False)
        text = data["choices"][0]["message"]["content"]
        m = re.search(r"\{.*\}", text, re.DOTALL)
        if not m:
            raise GatewayError(f"expand_entity returned no JSON: {text[:200]}")
        try:
            parsed = json.loads(m.group())
        except json.JSONDecodeError as exc:
            raise GatewayError(f"expand_entity JSON parse failed: {exc}") from exc
        return set(parsed.get("synonyms", [])), set(parsed.get("antonyms", []))


def make_gateway(backend: str = "mock", **overrides) -> Gateway:
    """Construct a gateway by backend name ("mock" or "openai_compatible")."""
    config = GatewayConfig.from_env(backend=backend, **overrides)
    if backend == "mock":
        return MockGateway(config)
    if backend == "openai_compatible":
        return OpenAICompatibleGateway(config)
    raise GatewayError(f"unknown backend {backend!r}")
