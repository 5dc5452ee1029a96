"""VQA judging backends: an HTTP chat-completions client, deterministic
mocks for desk-scale runs, and an append-only judgment cache.

A judgment is the probability the backend assigns to a probe's expected
answer ("Yes") on one image, plus its greedy answer. The probability is
read from the top-K alternative log-probabilities of the first answer
token: all alternatives whose text case-folds to the expected answer are
summed, since tokenizers split case and punctuation variants.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import string
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import requests

FULL_PROMPT = "FULL"

_STRIP = set(string.whitespace + string.punctuation)


class TransportError(RuntimeError):
    """Network failure that survived the configured retries."""


class CapabilityError(RuntimeError):
    """The endpoint cannot serve what the scoring mode needs."""


class FixtureMissError(KeyError):
    """A fixture-mode mock was asked for a question it has no entry for."""


def normalize_answer(text: str) -> str:
    """Case-fold and drop whitespace/punctuation ("Yes." == " yes")."""
    return "".join(ch for ch in text.lower() if ch not in _STRIP)


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    model_name: str
    api_key_env: str = "ATOMEVAL_API_KEY"
    max_parallel: int = 4
    timeout: float = 60.0
    retries: int = 2
    top_k: int = 20
    max_answer_tokens: int = 1
    greedy_fallback: bool = False  # score 0/1 from the greedy answer when
    #                                the endpoint returns no log-probabilities

    def __post_init__(self) -> None:
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class Judgment:
    prompt_id: str
    atom_id: int | str  # atom ordinal, or "FULL" for the whole-prompt probe
    probability: float
    greedy_answer: str
    backend_id: str
    cache_key: str
    flag: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability out of [0, 1]: {self.probability}")


def image_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def make_cache_key(img_digest: str, question_text: str, backend_id: str) -> str:
    payload = "\n".join((img_digest, question_text, backend_id))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def read_image(image: bytes | str | Path) -> bytes:
    if isinstance(image, bytes):
        return image
    return Path(image).read_bytes()


def _image_data_url(data: bytes) -> str:
    mime = "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"
    return f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"


class Backend:
    """Shared judging surface; subclasses supply _probe()."""

    backend_id: str

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls = 0

    def judge(self, image: bytes | str | Path, question) -> Judgment:
        data = read_image(image)
        key = make_cache_key(image_digest(data), question.question_text, self.backend_id)
        with self._lock:
            self.calls += 1
        probability, greedy, flag = self._probe(data, question, key)
        return Judgment(
            prompt_id=question.prompt_id,
            atom_id=question.atom_id,
            probability=probability,
            greedy_answer=greedy,
            backend_id=self.backend_id,
            cache_key=key,
            flag=flag,
        )

    def _probe(self, data: bytes, question, cache_key: str) -> tuple[float, str, str | None]:
        raise NotImplementedError


class HttpBackend(Backend):
    """Chat-completions client: one request per judgment, image embedded as
    a base64 data URL, top-K log-probabilities requested for the first
    answer token."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        super().__init__()
        self.config = config
        self.session = session or requests.Session()
        url_digest = hashlib.sha256(config.base_url.encode("utf-8")).hexdigest()[:8]
        self.backend_id = f"{config.model_name}@{url_digest}"

    def _probe(self, data: bytes, question, cache_key: str) -> tuple[float, str, str | None]:
        response = self._request(question.question_text, data)
        return self._extract(response, question.expected_answer)

    def _request(self, question_text: str, data: bytes) -> dict:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model_name,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "image_url", "image_url": {"url": _image_data_url(data)}},
                    {"type": "text", "text": question_text},
                ],
            }],
            "max_tokens": self.config.max_answer_tokens,
            "logprobs": True,
            "top_logprobs": self.config.top_k,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: str = ""
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.session.post(url, json=body, headers=headers,
                                         timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code == 200:
                    return resp.json()
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code < 500:
                    break  # client errors will not heal on retry
            if attempt < self.config.retries:
                time.sleep(0.2 * (attempt + 1))
        raise TransportError(f"request to {url} failed: {last_error}")

    def _extract(self, response: dict, expected: str) -> tuple[float, str, str | None]:
        try:
            choice = response["choices"][0]
        except (KeyError, IndexError) as exc:
            raise TransportError(f"malformed response: {response!r:.200}") from exc
        message_text = (choice.get("message") or {}).get("content") or ""
        logprobs = choice.get("logprobs")
        content = (logprobs or {}).get("content") or []
        if not content:
            if self.config.greedy_fallback:
                greedy = message_text.strip()
                matched = normalize_answer(greedy) == normalize_answer(expected)
                return (1.0 if matched else 0.0), greedy, "no-logprobs-greedy-only"
            raise CapabilityError(
                "endpoint returned no log-probabilities; rerun with greedy "
                "fallback mode enabled to score 0/1 from the greedy answer")

        first = content[0]
        greedy = first.get("token", "") or message_text.strip()
        target = normalize_answer(expected)
        total = 0.0
        for alt in first.get("top_logprobs", []):
            if normalize_answer(alt.get("token", "")) == target:
                total += math.exp(alt["logprob"])
        if total > 0.0:
            return min(total, 1.0), greedy, None
        # expected token absent from the top-K alternatives
        if normalize_answer(greedy) == target and "logprob" in first:
            return min(math.exp(first["logprob"]), 1.0), greedy, "expected-not-in-top-k"
        return 0.0, greedy, "expected-not-in-top-k"


class HashMockBackend(Backend):
    """Deterministic stand-in: probability is the cache key's 64-bit digest
    scaled to [0, 1), greedy answer coherent with it (>= 0.5 means "Yes")."""

    def __init__(self) -> None:
        super().__init__()
        self.backend_id = "mock-hash"

    def _probe(self, data: bytes, question, cache_key: str) -> tuple[float, str, str | None]:
        digest = hashlib.sha256(cache_key.encode("ascii")).digest()
        probability = int.from_bytes(digest[:8], "big") / 2.0 ** 64
        greedy = question.expected_answer if probability >= 0.5 else "No"
        return probability, greedy, None


class FixtureMockBackend(Backend):
    """Probabilities tabulated by question text; greedy answers coherent
    with the tabulated probability."""

    def __init__(self, table: Mapping[str, float]):
        super().__init__()
        self.backend_id = "mock-fixture"
        self.table = dict(table)

    def _probe(self, data: bytes, question, cache_key: str) -> tuple[float, str, str | None]:
        try:
            probability = self.table[question.question_text]
        except KeyError:
            raise FixtureMissError(
                f"fixture has no entry for question {question.question_text!r}") from None
        greedy = question.expected_answer if probability >= 0.5 else "No"
        return probability, greedy, None


class JudgmentCache:
    """Append-only JSONL store keyed by cache_key; a single writer
    serializes appends, later records win on reload."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self._records[rec["cache_key"]] = rec

    def __len__(self) -> int:
        return len(self._records)

    def get(self, cache_key: str) -> Judgment | None:
        rec = self._records.get(cache_key)
        if rec is None:
            return None
        return Judgment(
            prompt_id=rec["prompt_id"], atom_id=rec["atom_id"],
            probability=rec["probability"], greedy_answer=rec["greedy_answer"],
            backend_id=rec["backend_id"], cache_key=rec["cache_key"],
            flag=rec.get("flag"),
        )

    def put(self, judgment: Judgment) -> None:
        rec = {
            "cache_key": judgment.cache_key,
            "prompt_id": judgment.prompt_id,
            "atom_id": judgment.atom_id,
            "probability": judgment.probability,
            "greedy_answer": judgment.greedy_answer,
            "backend_id": judgment.backend_id,
        }
        if judgment.flag is not None:
            rec["flag"] = judgment.flag
        with self._lock:
            self._records[judgment.cache_key] = rec
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec) + "\n")


@dataclass
class BatchResult:
    judgments: list[Judgment]
    errors: list[dict]  # {"index", "prompt_id", "atom_id", "error"}
    cache_hits: int
    backend_calls: int

    def summary(self) -> dict:
        return {
            "judged": len(self.judgments),
            "failed": len(self.errors),
            "cache_hits": self.cache_hits,
            "backend_calls": self.backend_calls,
        }


def judge_batch(items: Sequence[tuple[bytes | str | Path, object]],
                backend: Backend,
                cache: JudgmentCache | None = None,
                max_parallel: int = 4) -> BatchResult:
    """Judge (image, question) pairs with at most max_parallel in flight.

    Cache hits never touch the backend; per-item failures are collected and
    the batch continues. Judgments come back in input order (failed items
    omitted), so a completed batch reruns to an identical result with zero
    backend calls.
    """
    results: list[Judgment | None] = [None] * len(items)
    errors: list[dict] = []
    pending: list[int] = []
    cache_hits = 0

    for index, (image, question) in enumerate(items):
        if cache is not None:
            data = read_image(image)
            key = make_cache_key(image_digest(data), question.question_text,
                                 backend.backend_id)
            hit = cache.get(key)
            if hit is not None:
                results[index] = hit
                cache_hits += 1
                continue
        pending.append(index)

    calls_before = backend.calls
    if pending:
        def run(index: int) -> tuple[int, Judgment | None, str | None]:
            image, question = items[index]
            try:
                return index, backend.judge(image, question), None
            except Exception as exc:  # per-item isolation
                return index, None, f"{type(exc).__name__}: {exc}"

        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            for index, judgment, error in pool.map(run, pending):
                if judgment is not None:
                    results[index] = judgment
                    if cache is not None:
                        cache.put(judgment)
                else:
                    _, question = items[index]
                    errors.append({
                        "index": index,
                        "prompt_id": question.prompt_id,
                        "atom_id": question.atom_id,
                        "error": error,
                    })

    judgments = [j for j in results if j is not None]
    return BatchResult(
        judgments=judgments,
        errors=errors,
        cache_hits=cache_hits,
        backend_calls=backend.calls - calls_before,
    )


def save_judgments(judgments: Iterable[Judgment], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for j in judgments:
            rec = {
                "prompt_id": j.prompt_id,
                "atom_id": j.atom_id,
                "probability": j.probability,
                "greedy_answer": j.greedy_answer,
                "backend_id": j.backend_id,
                "cache_key": j.cache_key,
            }
            if j.flag is not None:
                rec["flag"] = j.flag
            fh.write(json.dumps(rec) + "\n")


def load_judgments(path: str | Path) -> list[Judgment]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out.append(Judgment(
                    prompt_id=rec["prompt_id"], atom_id=rec["atom_id"],
                    probability=rec["probability"], greedy_answer=rec["greedy_answer"],
                    backend_id=rec["backend_id"], cache_key=rec["cache_key"],
                    flag=rec.get("flag"),
                ))
    return out
