from __future__ import annotations

import base64
from pathlib import Path

import pytest

from atomeval.vocabulary import Vocabulary, load_vocabulary

# 1x1 transparent PNG; per-prompt suffix bytes after IEND keep digests distinct
_PNG_1X1 = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8"
    "z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg=="
)


@pytest.fixture(scope="session")
def vocab() -> Vocabulary:
    return load_vocabulary()


def png_bytes(tag: str = "") -> bytes:
    return _PNG_1X1 + tag.encode("utf-8")


def write_images(root: Path, prompt_ids: list[str]) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for prompt_id in prompt_ids:
        (root / f"{prompt_id}.png").write_bytes(png_bytes(prompt_id))


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
    print(f"  [{outcome}] {name}")
