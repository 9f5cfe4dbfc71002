"""Sentence, token and citation-marker helpers shared by metrics and annotation."""

from __future__ import annotations

import re

from .gateway import CITATION_PATTERN

_SENTENCE_END = re.compile(r"[.!?]+")


def strip_citation_markers(text: str) -> str:
    """Remove [chunk:...] tags and collapse the whitespace they leave behind."""
    cleaned = CITATION_PATTERN.sub("", text)
    return re.sub(r"[ \t]{2,}", " ", cleaned).strip()


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences split on ., ! and ?, whitespace-trimmed."""
    spans: list[tuple[int, int]] = []
    cursor = 0
    boundaries = [m.end() for m in _SENTENCE_END.finditer(text)]
    if not boundaries or boundaries[-1] < len(text):
        boundaries.append(len(text))
    for end in boundaries:
        segment = text[cursor:end]
        stripped = segment.strip()
        if stripped:
            start = cursor + len(segment) - len(segment.lstrip())
            spans.append((start, start + len(stripped)))
        cursor = end
    return spans


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_spans(text)]


def claim_text(sentence: str) -> str:
    """Normalize a sentence into a judgeable claim: no markers, no trailing punctuation."""
    return strip_citation_markers(sentence).rstrip(".!? \t")
