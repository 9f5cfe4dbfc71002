"""Generate the bundled mini corpus: 20 docs x 400 tokens -> 200 chunks of 40
tokens (fixed_window, overlap 0), plus 20 questions with ground truths and
gold chunk ids. Deterministic; outputs are committed as package data.

Usage: python tools/make_mini_corpus.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ragtrace.ingest import ChunkingConfig, chunk_document

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "ragtrace" / "data" / "mini"

THEMES = {
    "wildlife": {
        "entities": ["Bromm", "Saltmarsh", "Heron", "Alder", "Rook", "Vixen", "Otter", "Bracken"],
        "verbs": ["watches", "feeds", "tracks", "counts", "sketches", "follows"],
        "nouns": ["herons", "otters", "foxes", "badgers", "owls", "geese"],
        "places": ["the reedbed", "the weir", "the oak", "the mudflats", "the warren", "the hedgerow"],
    },
    "astronomy": {
        "entities": ["Calder", "Meridian", "Lyra", "Halley", "Vega", "Orion", "Ceres", "Deimos"],
        "verbs": ["measures", "observes", "charts", "records", "calibrates", "images"],
        "nouns": ["transits", "occultations", "flares", "orbits", "spectra", "parallaxes"],
        "places": ["the dome", "the array", "the mirror", "the plate", "the circle", "the scope"],
    },
    "seafaring": {
        "entities": ["Marlow", "Tessera", "Gale", "Pelican", "Harrow", "Corvette", "Siren", "Ballast"],
        "verbs": ["rigs", "charts", "stows", "repairs", "signals", "logs"],
        "nouns": ["halyards", "soundings", "cargo", "beacons", "moorings", "tides"],
        "places": ["the shoal", "the harbor", "the shore", "the buoy", "the dock", "the quay"],
    },
    "machines": {
        "entities": ["Dynamo", "Cog", "Pelton", "Armature", "Gasket", "Flywheel", "Solenoid", "Crank"],
        "verbs": ["tunes", "oils", "balances", "rewinds", "torques", "gauges"],
        "nouns": ["bearings", "governors", "pistons", "camshafts", "injectors", "rotors"],
        "places": ["the rig", "the boiler", "the lathe", "the bench", "the loft", "the crib"],
    },
}

CHUNK_CFG = ChunkingConfig(max_tokens=40, overlap_tokens=0, split_on="fixed_window")


def sentence(rng: random.Random, theme: dict) -> str:
    # exactly 10 whitespace tokens
    entity = rng.choice(theme["entities"])
    verb = rng.choice(theme["verbs"])
    noun = rng.choice(theme["nouns"])
    place = rng.choice(theme["places"])  # two tokens
    second_entity = rng.choice(theme["entities"])
    return f"Warden {entity} {verb} the {noun} beside {place} with {second_entity}."


def build_documents() -> list[dict]:
    rng = random.Random(20260101)
    docs = []
    theme_names = list(THEMES)
    for d in range(20):
        theme = THEMES[theme_names[d % len(theme_names)]]
        sentences = [sentence(rng, theme) for _ in range(40)]  # 40 x 10 tokens
        text = " ".join(sentences)
        assert len(text.split()) == 400, len(text.split())
        docs.append({"doc_id": f"{theme_names[d % len(theme_names)]}-{d:02d}", "text": text})
    return docs


def build_questions(docs: list[dict]) -> list[dict]:
    rng = random.Random(47)
    questions = []
    for i in range(20):
        doc = docs[i]
        chunks = chunk_document(doc["text"], doc["doc_id"], CHUNK_CFG)
        chunk = chunks[rng.randrange(len(chunks))]
        # ground truth: one full sentence from the chosen chunk
        chunk_sentences = [s.strip() + "." for s in chunk.text.split(".") if s.strip()]
        truth = chunk_sentences[rng.randrange(len(chunk_sentences))]
        tokens = truth.split()
        subject, verb, noun = tokens[1], tokens[2], tokens[4]
        questions.append(
            {
                "id": f"q{i:02d}",
                "text": f"What does warden {subject} do with the {noun}?",
                "ground_truth": truth,
                "gold_chunk_ids": [chunk.id],
                "tags": [doc["doc_id"].split("-")[0]],
            }
        )
    return questions


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    docs = build_documents()
    questions = build_questions(docs)
    total_chunks = sum(len(chunk_document(d["text"], d["doc_id"], CHUNK_CFG)) for d in docs)
    assert total_chunks == 200, total_chunks
    with (OUT_DIR / "docs.jsonl").open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    with (OUT_DIR / "questions.jsonl").open("w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q, sort_keys=True) + "\n")
    print(f"wrote {len(docs)} docs ({total_chunks} chunks) and {len(questions)} questions to {OUT_DIR}")


if __name__ == "__main__":
    main()
