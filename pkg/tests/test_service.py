import json
import time
from importlib import resources

import jsonschema
import pytest
from fastapi.testclient import TestClient
from referencing import Registry, Resource

from ragtrace import EntityLexicon, MetricWeights, MockGateway, RunStore
from ragtrace.service import AppState, create_app


def _registry():
    files = resources.files("ragtrace") / "schemas"
    common = json.loads((files / "common.json").read_text(encoding="utf-8"))
    endpoints = json.loads((files / "endpoints.json").read_text(encoding="utf-8"))
    return Registry().with_resources(
        [
            ("ragtrace/common.json", Resource.from_contents(common)),
            ("ragtrace/endpoints.json", Resource.from_contents(endpoints)),
        ]
    )


REGISTRY = _registry()


def check_schema(payload, definition):
    jsonschema.validate(
        payload, {"$ref": f"ragtrace/endpoints.json#/$defs/{definition}"}, registry=REGISTRY
    )


def check_error(payload):
    jsonschema.validate(payload, {"$ref": "ragtrace/common.json#/$defs/error_envelope"}, registry=REGISTRY)


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
     "ground_truth": "Bread rises when yeast is warm", "tags": []},
]


@pytest.fixture
def client(tmp_path):
    state = AppState(
        gateway=MockGateway(),
        store=RunStore(tmp_path / "runs"),
        lexicon=EntityLexicon(tmp_path / "lexicon.json"),
        weights=MetricWeights(),
    )
    return TestClient(create_app(state))


def wait_for_job(client, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/api/jobs/{job_id}").json()
        check_schema(body, "job_status")
        if body["status"] in ("done", "failed"):
            return body
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


def load_corpus_and_questions(client):
    r = client.post("/api/corpus", json={"documents": DOCUMENTS, "max_tokens": 16, "overlap_tokens": 0})
    assert r.status_code == 200, r.text
    check_schema(r.json(), "corpus_summary")
    r = client.post("/api/questions", json={"questions": QUESTIONS})
    assert r.status_code == 200, r.text
    check_schema(r.json(), "questions_report")


def fit_projection_via_api(client, iterations=300):
    r = client.post("/api/projection", json={"perplexity": 5, "iterations": iterations, "seed": 7})
    assert r.status_code == 202
    body = r.json()
    check_schema(body, "job_accepted")
    assert wait_for_job(client, body["job_id"])["status"] == "done"


def run_experiment_via_api(client, label="original", num_questions=3, keywords=None):
    payload = {
        "config": {"num_chunks": 2, "num_questions": num_questions, "selection": "random",
                   "keywords": keywords or []},
        "strategy": {"kind": "plain", "k": 2},
        "label": label,
        "seed": 3,
    }
    r = client.post("/api/experiments", json=payload)
    assert r.status_code == 202, r.text
    body = r.json()
    check_schema(body, "job_accepted")
    assert wait_for_job(client, body["job_id"])["status"] == "done"
    return body["run_id"]


class TestStateMachine:
    def test_projection_before_corpus_is_409(self, client):
        r = client.get("/api/projection")
        assert r.status_code == 409
        check_error(r.json())

    def test_search_preset_without_runs_is_409(self, client):
        load_corpus_and_questions(client)
        r = client.post("/api/search", json={"query": "anything", "preset": "high_hallucination"})
        assert r.status_code == 409
        body = r.json()
        check_error(body)
        assert body["code"] == "missing_prior_records"

    def test_unknown_question_404(self, client):
        load_corpus_and_questions(client)
        r = client.get("/api/questions/ghost/details")
        assert r.status_code == 404
        check_error(r.json())

    def test_validation_error_400(self, client):
        r = client.post("/api/search", json={"preset": "similarity"})
        assert r.status_code == 400
        check_error(r.json())

    def test_corpus_upload_invalidates_projection(self, client):
        load_corpus_and_questions(client)
        fit_projection_via_api(client)
        assert client.get("/api/projection").status_code == 200
        r = client.post("/api/corpus", json={"documents": DOCUMENTS[:2], "max_tokens": 16, "overlap_tokens": 0})
        assert r.status_code == 200
        assert client.get("/api/projection").status_code == 409


class TestHappyPath:
    def test_full_mock_flow_schema_valid(self, client):
        load_corpus_and_questions(client)
        fit_projection_via_api(client)

        projection = client.get("/api/projection")
        assert projection.status_code == 200
        check_schema(projection.json(), "projection_export")
        assert abs(sum(projection.json()["grid"]["cells"]) - 1.0) < 1e-9

        run_id = run_experiment_via_api(client)

        runs = client.get("/api/experiments")
        assert runs.status_code == 200
        check_schema(runs.json(), "run_list")
        assert runs.json()["runs"][0]["run_id"] == run_id

        radar = client.get(f"/api/experiments/{run_id}/radar")
        assert radar.status_code == 200
        check_schema(radar.json(), "radar_response")

        search = client.post("/api/search", json={"query": "who chased the cat?", "preset": "similarity", "limit": 2})
        assert search.status_code == 200
        check_schema(search.json(), "search_response")
        assert len(search.json()["results"]) == 2
        assert search.json()["query"]["position"] is not None

        details = client.get("/api/questions/q-spike/details")
        assert details.status_code == 200
        check_schema(details.json(), "question_details")
        assert details.json()["ground_truth"] == QUESTIONS[0]["ground_truth"]

        chunklink = client.get("/api/questions/q-spike/chunklink?strategies=plain,standard,hyde")
        assert chunklink.status_code == 200
        check_schema(chunklink.json(), "chunklink_response")
        assert len(chunklink.json()["runs"]) == 3

        evidence = client.get("/api/questions/q-spike/evidence")
        assert evidence.status_code == 200
        check_schema(evidence.json(), "evidence_response")

        failures = client.get("/api/failures?threshold=0.5")
        assert failures.status_code == 200
        check_schema(failures.json(), "failures_response")
        assert [a["type"] for a in failures.json()["anchors"]] == [
            "retrieval_failure", "prompt_vulnerability", "generation_anomaly", "standard_inconsistency",
        ]

        topics = client.get("/api/cells/0/0/topics")
        assert topics.status_code == 200
        check_schema(topics.json(), "cell_topics")

    def test_identical_gets_between_mutations(self, client):
        load_corpus_and_questions(client)
        fit_projection_via_api(client)
        run_experiment_via_api(client)
        for path in ("/api/projection", "/api/experiments", "/api/failures?threshold=0.5",
                     "/api/questions/q-spike/details"):
            first = client.get(path)
            second = client.get(path)
            assert first.status_code == second.status_code == 200
            assert first.content == second.content

    def test_radar_against_other_run(self, client):
        load_corpus_and_questions(client)
        before = run_experiment_via_api(client, label="before")
        after = run_experiment_via_api(client, label="after")
        r = client.get(f"/api/experiments/{after}/radar?against={before}")
        assert r.status_code == 200
        charts = r.json()["charts"]
        assert all(set(c["series"]) <= {"before", "after"} for c in charts)

    def test_cell_topics_find_entities(self, client):
        load_corpus_and_questions(client)
        fit_projection_via_api(client)
        grid = client.get("/api/projection").json()
        # locate the cell of the first point and ask for its topics
        resolution = grid["grid"]["resolution"]
        bounds = grid["grid"]["bounds"]
        p = grid["points"][0]
        col = min(int((p["x"] - bounds["x_min"]) / (bounds["x_max"] - bounds["x_min"]) * resolution), resolution - 1)
        row = min(int((p["y"] - bounds["y_min"]) / (bounds["y_max"] - bounds["y_min"]) * resolution), resolution - 1)
        r = client.get(f"/api/cells/{row}/{col}/topics")
        assert r.status_code == 200
        check_schema(r.json(), "cell_topics")

    def test_openapi_served_at_api_spec(self, client):
        r = client.get("/api/spec")
        assert r.status_code == 200
        assert "/api/corpus" in r.json()["paths"]
