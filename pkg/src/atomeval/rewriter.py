"""Detailed prompt rewriting through an external text LLM.

Rewriting is an offline, optional step that produces a sidecar file; the
rewritten text is only ever consumed by image generation, never by
question generation or scoring. Replies longer than the 110-word target
are kept but flagged, since the limit is a suggestion to the LLM, not a
validity rule. Rewrites are endpoint-dependent and therefore not
reproducible across different LLMs; the sidecar records which backend
produced them.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .backend import BackendConfig, TransportError
from .grammar import PromptSpec, attach_rewrite

REWRITE_WORD_LIMIT = 110

_EXAMPLE_1 = (
    "Prompt: a photo of a dog right of a teddy bear\n\n"
    "Detailed Prompt: A soft, beige teddy bear sits upright on a wooden floor. "
    "The teddy bear has round black eyes and a small stitched nose. Its fur is "
    "slightly matted, giving it a well-loved appearance. To the right of the "
    "teddy bear, a golden retriever dog stands on all fours. The dog's fur is "
    "smooth and shiny, catching the light. Its ears are perked up, and its tail "
    "is slightly raised. The dog's eyes are focused forward, exuding a calm and "
    "attentive expression. The scene is set in a realistic, photographic style, "
    "with natural lighting highlighting the textures of both the teddy bear and "
    "the dog."
)

_EXAMPLE_2 = (
    "Prompt: a photo of two backpacks\n\n"
    "Detailed Prompt: There are two backpacks placed side by side on a wooden "
    "floor. Both backpacks are medium-sized and upright. The first backpack is "
    "black with a sleek, smooth texture. The second backpack is navy blue with "
    "a slightly rugged appearance. Each backpack has multiple zippered "
    "compartments visible on the front. The straps of both backpacks rest "
    "neatly against their sides. The lighting is soft, highlighting the "
    "realistic textures and colors of the materials. The scene is simple, "
    "focusing only on the two backpacks in a photographic style."
)

_EXAMPLE_3 = (
    "Prompt: a photo of a green bus and a purple microwave\n\n"
    "Detailed Prompt: A vibrant green bus is parked on the left side of the "
    "scene. The bus has a glossy, metallic finish that reflects the surrounding "
    "light realistically. Its large windows are clean and transparent, "
    "revealing empty seats inside. On the right side, a compact purple "
    "microwave sits on a flat surface. The microwave has a matte finish, with a "
    "small digital display and a silver handle on its front. Both objects are "
    "positioned without overlap, ensuring their distinct colors and details are "
    "clearly visible. The scene is rendered in a photographic style, "
    "emphasizing lifelike textures and realistic lighting."
)

IN_CONTEXT_EXAMPLES = (_EXAMPLE_1, _EXAMPLE_2, _EXAMPLE_3)

WORD_LIMIT_SENTENCE = (
    f"Make sure the detailed prompt is under {REWRITE_WORD_LIMIT} words."
)


def build_rewrite_instruction(prompt_text: str) -> str:
    """The full instruction sent to the rewriting LLM, with the prompt
    substituted in."""
    return (
        "I am evaluating a text-to-image generation model. Given a short "
        "prompt, rewrite the prompt to a more detailed version.\n\n"
        "Here are three examples:\n\n"
        f"{_EXAMPLE_1}\n\n"
        f"{_EXAMPLE_2}\n\n"
        f"{_EXAMPLE_3}\n\n"
        "Here is the prompt for you to rewrite:\n\n"
        f"Prompt: {prompt_text}\n\n"
        "Detailed Prompt:\n\n"
        "Reply with the detailed prompt alone, with no extra text. "
        f"{WORD_LIMIT_SENTENCE}"
    )


@dataclass(frozen=True)
class RewriteRecord:
    prompt_id: str
    original_text: str
    rewritten_text: str
    word_count: int
    llm_backend_id: str
    over_length: bool

    def __post_init__(self) -> None:
        if not self.rewritten_text.strip():
            raise ValueError(f"prompt {self.prompt_id}: empty rewrite")


def word_count(text: str) -> int:
    return len(text.split())


class HttpLlm:
    """Text-only chat-completions client for the rewriting step."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        url_digest = hashlib.sha256(config.base_url.encode("utf-8")).hexdigest()[:8]
        self.backend_id = f"{config.model_name}@{url_digest}"

    def complete(self, instruction: str) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": instruction}],
            "max_tokens": 512,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error = ""
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.session.post(url, json=body, headers=headers,
                                         timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code == 200:
                    payload = resp.json()
                    try:
                        return payload["choices"][0]["message"]["content"]
                    except (KeyError, IndexError) as exc:
                        raise TransportError(
                            f"malformed completion response: {payload!r:.200}") from exc
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code < 500:
                    break
            if attempt < self.config.retries:
                time.sleep(0.2 * (attempt + 1))
        raise TransportError(f"request to {url} failed: {last_error}")


def rewrite(prompt: PromptSpec, llm) -> RewriteRecord:
    """Rewrite one prompt; the llm needs .complete(text) and .backend_id."""
    reply = llm.complete(build_rewrite_instruction(prompt.text))
    if not reply or not reply.strip():
        raise ValueError(f"prompt {prompt.id}: LLM returned an empty rewrite")
    text = reply.strip()
    count = word_count(text)
    return RewriteRecord(
        prompt_id=prompt.id,
        original_text=prompt.text,
        rewritten_text=text,
        word_count=count,
        llm_backend_id=llm.backend_id,
        over_length=count > REWRITE_WORD_LIMIT,
    )


def rewrite_many(prompts: Sequence[PromptSpec], llm,
                 on_error: Callable[[str, str], None] | None = None
                 ) -> tuple[list[RewriteRecord], list[dict]]:
    """Rewrite a batch, collecting per-prompt failures instead of stopping."""
    records: list[RewriteRecord] = []
    failures: list[dict] = []
    for prompt in prompts:
        try:
            records.append(rewrite(prompt, llm))
        except Exception as exc:
            failures.append({"prompt_id": prompt.id, "error": f"{type(exc).__name__}: {exc}"})
            if on_error is not None:
                on_error(prompt.id, str(exc))
    return records, failures


def attach_rewrites(benchmark: Sequence[PromptSpec],
                    records: Sequence[RewriteRecord]) -> list[PromptSpec]:
    """Populate rewritten_text on matching prompts; unmatched prompts stay
    evaluable in original mode. Record ids must all exist in the benchmark."""
    by_id = {p.id: p for p in benchmark}
    dangling = [r.prompt_id for r in records if r.prompt_id not in by_id]
    if dangling:
        raise ValueError(f"rewrite records reference unknown prompts: {dangling}")
    rewritten = {r.prompt_id: r.rewritten_text for r in records}
    return [
        attach_rewrite(p, rewritten[p.id]) if p.id in rewritten else p
        for p in benchmark
    ]


def save_rewrites(records: Iterable[RewriteRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "prompt_id": r.prompt_id,
                "rewritten_text": r.rewritten_text,
                "word_count": r.word_count,
                "over_length": r.over_length,
                "llm_backend_id": r.llm_backend_id,
                "original_text": r.original_text,
            }) + "\n")


def load_rewrites(path: str | Path) -> list[RewriteRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out.append(RewriteRecord(
                    prompt_id=rec["prompt_id"],
                    original_text=rec.get("original_text", ""),
                    rewritten_text=rec["rewritten_text"],
                    word_count=rec["word_count"],
                    llm_backend_id=rec.get("llm_backend_id", ""),
                    over_length=bool(rec["over_length"]),
                ))
    return out
