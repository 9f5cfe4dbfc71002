"""Regenerate tests/golden/mini_pipeline.json from the bundled mini corpus.

Run after any intentional change to the pipeline's output format, then review
the diff. Usage: python tools/make_golden.py
"""

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from pipeline_helpers import run_golden_pipeline  # noqa: E402


def main() -> None:
    out = ROOT / "tests" / "golden" / "mini_pipeline.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="ragtrace-golden-") as tmp:
        payload = run_golden_pipeline(Path(tmp))
    out.write_text(payload + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(payload)} bytes)")


if __name__ == "__main__":
    main()
