"""Record API fixtures for the frontend tests.

Spins the FastAPI app with the mock backend over a small themed corpus, runs
the full interaction flow, and dumps each endpoint's response JSON into
frontend/fixtures/. Deterministic, so the committed fixtures are stable.

Usage: python tools/make_ui_fixtures.py
"""

import json
import sys
import tempfile
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from ragtrace import EntityLexicon, MetricWeights, MockGateway, RunStore  # noqa: E402
from ragtrace.service import AppState, create_app  # noqa: E402

OUT = ROOT / "frontend" / "fixtures"

DOCUMENTS = [
    {"doc_id": "animals", "text": "The dog Spike guards the yard all night long. The cat Tom naps on the warm sill. "
                                  "Jerry the mouse hides inside the kitchen wall. Spike chased Tom around the garden twice. "
                                  "The parrot Rio repeats whatever Tom says at dawn."},
    {"doc_id": "space", "text": "The probe Voyager left the solar system years ago. Mars hosts the rover Perseverance near the delta. "
                                "Saturn has many moons including icy Titan. Comets carry dust older than the planets themselves."},
    {"doc_id": "cooking", "text": "Soup needs salt and a lot of patience. Bread rises when the yeast is warm enough. "
                                  "Butter burns faster than olive oil does. A sharp knife is safer than a dull one."},
]

QUESTIONS = [
    {"id": "q-spike", "text": "who chased Tom around the garden?",
     "ground_truth": "Spike chased Tom around the garden", "tags": ["animals"]},
    {"id": "q-mars", "text": "what rover is on Mars?",
     "ground_truth": "Mars hosts the rover Perseverance", "tags": ["space"]},
    {"id": "q-bread", "text": "when does bread rise?",
     "ground_truth": "Bread rises when the yeast is warm", "tags": []},
]


def wait(client, job_id):
    while True:
        status = client.get(f"/api/jobs/{job_id}").json()
        if status["status"] in ("done", "failed"):
            assert status["status"] == "done", status
            return
        time.sleep(0.05)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix="ragtrace-fixtures-"))
    state = AppState(
        gateway=MockGateway(),
        store=RunStore(tmp / "runs"),
        lexicon=EntityLexicon(tmp / "lexicon.json"),
        weights=MetricWeights(),
    )
    client = TestClient(create_app(state))

    assert client.post("/api/corpus", json={"documents": DOCUMENTS, "max_tokens": 16, "overlap_tokens": 0}).status_code == 200
    assert client.post("/api/questions", json={"questions": QUESTIONS}).status_code == 200

    wait(client, client.post("/api/projection", json={"perplexity": 5, "iterations": 300, "seed": 7}).json()["job_id"])

    def experiment(label):
        body = client.post("/api/experiments", json={
            "config": {"num_chunks": 2, "num_questions": 3, "selection": "random"},
            "strategy": {"kind": "plain", "k": 2},
            "label": label,
            "seed": 3,
        }).json()
        wait(client, body["job_id"])
        return body["run_id"]

    before = experiment("before")
    after = experiment("after")

    fixtures = {
        "projection": client.get("/api/projection"),
        "failures": client.get("/api/failures?threshold=0.5"),
        "search": client.post("/api/search", json={"query": "who chased the cat?", "preset": "similarity", "limit": 3}),
        "details": client.get("/api/questions/q-spike/details"),
        "chunklink": client.get("/api/questions/q-spike/chunklink?strategies=plain,standard,hyde"),
        "evidence": client.get("/api/questions/q-spike/evidence"),
        "radar": client.get(f"/api/experiments/{after}/radar?against={before}"),
        "runs": client.get("/api/experiments"),
    }
    for name, response in fixtures.items():
        assert response.status_code == 200, (name, response.status_code, response.text)
        (OUT / f"{name}.json").write_text(
            json.dumps(response.json(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote fixtures/{name}.json")


if __name__ == "__main__":
    main()
