import json
import os
import subprocess
import sys
from importlib import resources

import pytest

FIXED_ENV = {**os.environ, "RAGTRACE_FIXED_CLOCK": "2026-01-01T00:00:00Z"}


def run_cli(*args, env=None, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "ragtrace.cli", *args],
        capture_output=True, text=True, env=env or FIXED_ENV, cwd=cwd,
    )


def mini_path(name):
    return str(resources.files("ragtrace") / "data" / "mini" / name)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    result = run_cli(
        "ingest", "--docs", mini_path("docs.jsonl"), "--out", str(out),
        "--max-tokens", "40", "--overlap", "0", "--split-on", "fixed_window",
    )
    assert result.returncode == 0, result.stderr
    return out


class TestIngest:
    def test_creates_corpus_layout(self, corpus_dir):
        assert (corpus_dir / "manifest.json").exists()
        assert (corpus_dir / "chunks.jsonl").exists()
        assert (corpus_dir / "embeddings.bin").exists()
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        assert manifest["count"] == 200
        assert manifest["created_at"] == "2026-01-01T00:00:00Z"

    def test_progress_events_are_jsonl(self, tmp_path):
        result = run_cli(
            "ingest", "--docs", mini_path("docs.jsonl"), "--out", str(tmp_path / "c"),
            "--max-tokens", "40", "--overlap", "0", "--split-on", "fixed_window",
        )
        assert result.returncode == 0
        events = [json.loads(line) for line in result.stderr.splitlines() if line.strip()]
        assert all({"event", "pct", "msg"} <= set(e) for e in events)
        assert events[-1]["pct"] == 100

    def test_missing_docs_flag_is_usage_error(self):
        result = run_cli("ingest", "--out", "/tmp/nowhere")
        assert result.returncode == 1

    def test_unreadable_docs_is_runtime_error(self, tmp_path):
        result = run_cli("ingest", "--docs", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "c"))
        assert result.returncode == 2


class TestEval:
    def test_eval_produces_deterministic_run(self, corpus_dir, tmp_path):
        args = (
            "eval", "--corpus", str(corpus_dir), "--questions", mini_path("questions.jsonl"),
            "--strategy", "plain", "--k", "5",
        )
        r1 = run_cli(*args, "--out", str(tmp_path / "run1.json"))
        r2 = run_cli(*args, "--out", str(tmp_path / "run2.json"))
        assert r1.returncode == 0, r1.stderr
        assert r2.returncode == 0
        assert (tmp_path / "run1.json").read_bytes() == (tmp_path / "run2.json").read_bytes()
        run = json.loads((tmp_path / "run1.json").read_text())
        assert len(run["records"]) == 20
        assert run["started_at"] == "2026-01-01T00:00:00Z"

    def test_eval_without_corpus_is_usage_error(self):
        result = run_cli("eval", "--questions", "q.jsonl", "--out", "x.json")
        assert result.returncode == 1
        assert "usage" in result.stderr.lower()

    def test_eval_persists_into_store(self, corpus_dir, tmp_path):
        result = run_cli(
            "eval", "--corpus", str(corpus_dir), "--questions", mini_path("questions.jsonl"),
            "--strategy", "standard", "--k", "3", "--out", str(tmp_path / "run.json"),
            "--store", str(tmp_path / "runs"), "--label", "before",
        )
        assert result.returncode == 0, result.stderr
        run_id = json.loads(result.stdout)["run_id"]
        index = json.loads((tmp_path / "runs" / "index.json").read_text())
        assert [row["run_id"] for row in index] == [run_id]


class TestProject:
    def test_projection_export_shape(self, corpus_dir, tmp_path):
        result = run_cli(
            "project", "--corpus", str(corpus_dir), "--out", str(tmp_path / "proj.json"),
            "--perplexity", "10", "--iterations", "250", "--seed", "7", "--resolution", "20",
        )
        assert result.returncode == 0, result.stderr
        data = json.loads((tmp_path / "proj.json").read_text())
        assert len(data["points"]) == 200
        assert data["grid"]["resolution"] == 20
        assert abs(sum(data["grid"]["cells"]) - 1.0) < 1e-9
        assert data["kl_history"]


@pytest.fixture(scope="module")
def store_with_run(corpus_dir, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("store")
    result = run_cli(
        "eval", "--corpus", str(corpus_dir), "--questions", mini_path("questions.jsonl"),
        "--strategy", "plain", "--k", "3", "--out", str(tmp / "run.json"), "--store", str(tmp / "runs"),
    )
    assert result.returncode == 0, result.stderr
    return tmp / "runs", json.loads(result.stdout)["run_id"]


class TestExportAndRadar:

    def test_export_json(self, store_with_run):
        store, run_id = store_with_run
        result = run_cli("export", "--run", run_id, "--store", str(store), "--format", "json")
        assert result.returncode == 0
        assert json.loads(result.stdout)["run_id"] == run_id

    def test_export_csv(self, store_with_run):
        store, run_id = store_with_run
        result = run_cli("export", "--run", run_id, "--store", str(store), "--format", "csv")
        assert result.returncode == 0
        header = result.stdout.splitlines()[0]
        assert header.startswith("question_id,retrieval_failure")
        assert len(result.stdout.splitlines()) == 21

    def test_export_unknown_run_is_runtime_error(self, store_with_run):
        store, _ = store_with_run
        result = run_cli("export", "--run", "ghost", "--store", str(store))
        assert result.returncode == 2
        assert "not found" in result.stderr

    def test_radar_over_run(self, store_with_run):
        store, run_id = store_with_run
        result = run_cli("radar", "--runs", run_id, "--store", str(store))
        assert result.returncode == 0
        charts = json.loads(result.stdout)
        assert len(charts) == 20


class TestConfigFile:
    def test_json_config_fills_defaults(self, corpus_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"k": 2, "strategy": "standard"}))
        result = run_cli(
            "eval", "--corpus", str(corpus_dir), "--questions", mini_path("questions.jsonl"),
            "--out", str(tmp_path / "run.json"), "--config", str(config),
        )
        assert result.returncode == 0, result.stderr
        run = json.loads((tmp_path / "run.json").read_text())
        assert run["strategy"]["kind"] == "standard"
        assert run["strategy"]["k"] == 2

    def test_flags_override_config(self, corpus_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"k": 2}))
        result = run_cli(
            "eval", "--corpus", str(corpus_dir), "--questions", mini_path("questions.jsonl"),
            "--out", str(tmp_path / "run.json"), "--config", str(config), "--k", "4",
        )
        assert result.returncode == 0, result.stderr
        run = json.loads((tmp_path / "run.json").read_text())
        assert run["strategy"]["k"] == 4
