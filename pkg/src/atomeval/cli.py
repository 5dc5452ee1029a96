"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 completed with per-item failures (missing images,
failed judgments, failed rewrites), 2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analytics, backend as backend_mod, human, questions as questions_mod
from . import rewriter as rewriter_mod, scoring
from .grammar import PromptSpec, build_benchmark, load_benchmark, save_benchmark
from .vocabulary import VocabularyError, load_vocabulary

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass
class RunManifest:
    """Everything one evaluation run needs; validated before anything runs."""
    benchmark: Path
    images: Path
    model_id: str
    out: Path
    rewritten: bool = False
    backend_kind: str = "http"  # http | mock-hash | mock-fixture
    backend_config: backend_mod.BackendConfig | None = None
    fixture: Path | None = None
    cache: Path | None = None
    vocab: Path | None = None
    seed: int = 0

    def validate(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be nonempty")
        for label, path in (("benchmark", self.benchmark), ("images root", self.images)):
            if not Path(path).exists():
                raise FileNotFoundError(f"{label} not found: {path}")
        if self.backend_kind == "http" and self.backend_config is None:
            raise ValueError("http backend needs --backend-url and --backend-model")
        if self.backend_kind == "mock-fixture" and self.fixture is None:
            raise ValueError("mock-fixture backend needs --fixture")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        vocab = load_vocabulary(args.vocab)
        prompts = build_benchmark(seed=args.seed, vocab=vocab)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_benchmark(prompts, out)
    except (OSError, VocabularyError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {len(prompts)} prompts to {args.out}")
    return 0


def cmd_questions(args: argparse.Namespace) -> int:
    try:
        vocab = load_vocabulary(args.vocab)
        prompts = load_benchmark(args.benchmark, vocab)
        records = []
        for prompt in prompts:
            records.extend(questions_mod.questions_to_records(
                questions_mod.atom_questions(prompt)))
            records.extend(questions_mod.questions_to_records(
                [questions_mod.vqascore_prompt(prompt)]))
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {len(records)} questions to {args.out}")
    return 0


def _find_image(images_root: Path, prompt_id: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = images_root / f"{prompt_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def _make_backend(manifest: RunManifest) -> backend_mod.Backend:
    if manifest.backend_kind == "mock-hash":
        return backend_mod.HashMockBackend()
    if manifest.backend_kind == "mock-fixture":
        table = json.loads(Path(manifest.fixture).read_text(encoding="utf-8"))
        return backend_mod.FixtureMockBackend(table)
    return backend_mod.HttpBackend(manifest.backend_config)


def run_eval(manifest: RunManifest) -> tuple[int, dict]:
    """Evaluate one image corpus against the benchmark; returns (exit code,
    run summary)."""
    manifest.validate()
    vocab = load_vocabulary(manifest.vocab)
    prompts = load_benchmark(manifest.benchmark, vocab)
    images_root = Path(manifest.images)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)

    evaluable: list[tuple[PromptSpec, Path]] = []
    missing: list[str] = []
    for prompt in prompts:
        image = _find_image(images_root, prompt.id)
        if image is None:
            missing.append(prompt.id)
        else:
            evaluable.append((prompt, image))

    all_questions: list = []
    items: list[tuple[Path, object]] = []
    for prompt, image in evaluable:
        per_prompt = list(questions_mod.atom_questions(prompt))
        per_prompt.append(questions_mod.vqascore_prompt(prompt))
        all_questions.extend(per_prompt)
        items.extend((image, q) for q in per_prompt)

    with (out / "questions.jsonl").open("w", encoding="utf-8") as fh:
        for rec in questions_mod.questions_to_records(all_questions):
            fh.write(json.dumps(rec) + "\n")

    judging_backend = _make_backend(manifest)
    cache = backend_mod.JudgmentCache(manifest.cache)
    max_parallel = (manifest.backend_config.max_parallel
                    if manifest.backend_config else 4)
    batch = backend_mod.judge_batch(items, judging_backend, cache=cache,
                                    max_parallel=max_parallel)
    backend_mod.save_judgments(batch.judgments, out / "judgments.jsonl")

    by_prompt: dict[str, dict] = {}
    for judgment in batch.judgments:
        by_prompt.setdefault(judgment.prompt_id, {})[judgment.atom_id] = judgment

    score_sets = []
    incomplete: list[str] = []
    for prompt, _ in evaluable:
        judged = by_prompt.get(prompt.id, {})
        full = judged.get(backend_mod.FULL_PROMPT)
        atoms = [judged[a.id] for a in prompt.atoms if a.id in judged]
        if full is None or len(atoms) != prompt.atomicity:
            incomplete.append(prompt.id)
            continue
        score_sets.append(scoring.score_image(
            prompt, full, atoms, manifest.model_id, manifest.rewritten))
    scoring.save_score_sets(score_sets, out / "scores.jsonl")

    summary = {
        "model_id": manifest.model_id,
        "rewritten": manifest.rewritten,
        "prompts": len(prompts),
        "scored": len(score_sets),
        "missing_images": missing,
        "incomplete_prompts": incomplete,
        "judgment_errors": batch.errors,
        "cache_hits": batch.cache_hits,
        "backend_calls": batch.backend_calls,
        "means": {m: scoring.aggregate_benchmark(score_sets, m)
                  for m in scoring.METRICS} if score_sets else {},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    (out / "summary.txt").write_text(scoring.render_summary(score_sets),
                                     encoding="utf-8")
    if score_sets:
        _write_rollups(out, prompts, score_sets, by_prompt)
    code = 1 if (missing or incomplete or batch.errors) else 0
    return code, summary


def _write_rollups(out: Path, prompts: list[PromptSpec], score_sets, by_prompt) -> None:
    """Per-atomicity table of every metric, and a per-skill table of the
    atom-level probabilities."""
    atomicity_by_id = {p.id: p.atomicity for p in prompts}
    values = []
    for metric in scoring.METRICS:
        values.extend(scoring.prompt_values(score_sets, metric, atomicity_by_id))
    (out / "rollup_atomicity.tsv").write_text(
        scoring.render_rollup(scoring.rollup(values, "atomicity")), encoding="utf-8")

    scored = {s.prompt_id for s in score_sets}
    atom_vals = []
    for prompt in prompts:
        if prompt.id not in scored:
            continue
        judged = by_prompt[prompt.id]
        atoms = [judged[a.id] for a in prompt.atoms]
        atom_vals.extend(scoring.atom_values(prompt, atoms))
    (out / "rollup_skill.tsv").write_text(
        scoring.render_rollup(scoring.rollup(atom_vals, "skill")), encoding="utf-8")


def cmd_eval(args: argparse.Namespace) -> int:
    config = None
    if args.backend == "http":
        if not args.backend_url or not args.backend_model:
            return _fail("http backend needs --backend-url and --backend-model")
        config = backend_mod.BackendConfig(
            base_url=args.backend_url, model_name=args.backend_model,
            api_key_env=args.api_key_env, max_parallel=args.max_parallel,
            timeout=args.timeout, retries=args.retries,
            greedy_fallback=args.greedy_fallback,
        )
    manifest = RunManifest(
        benchmark=Path(args.benchmark), images=Path(args.images),
        model_id=args.model_id, out=Path(args.out), rewritten=args.rewritten,
        backend_kind=args.backend, backend_config=config,
        fixture=Path(args.fixture) if args.fixture else None,
        cache=Path(args.cache) if args.cache else None,
        vocab=Path(args.vocab) if args.vocab else None, seed=args.seed,
    )
    try:
        code, summary = run_eval(manifest)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    print(f"scored {summary['scored']}/{summary['prompts']} prompts "
          f"({summary['backend_calls']} backend calls, "
          f"{summary['cache_hits']} cache hits)")
    if summary["missing_images"]:
        print(f"missing images for {len(summary['missing_images'])} prompts: "
              f"{summary['missing_images'][:10]}", file=sys.stderr)
    return code


def cmd_rewrite(args: argparse.Namespace) -> int:
    try:
        vocab = load_vocabulary(args.vocab)
        prompts = load_benchmark(args.benchmark, vocab)
        if args.limit is not None:
            prompts = prompts[:args.limit]
        config = backend_mod.BackendConfig(
            base_url=args.backend_url, model_name=args.backend_model,
            api_key_env=args.api_key_env, timeout=args.timeout,
            retries=args.retries,
        )
        llm = rewriter_mod.HttpLlm(config)
        records, failures = rewriter_mod.rewrite_many(prompts, llm)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        rewriter_mod.save_rewrites(records, out)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    flagged = sum(r.over_length for r in records)
    print(f"rewrote {len(records)}/{len(prompts)} prompts "
          f"({flagged} over {rewriter_mod.REWRITE_WORD_LIMIT} words) to {args.out}")
    for failure in failures:
        print(f"failed: {failure['prompt_id']}: {failure['error']}", file=sys.stderr)
    return 1 if failures else 0


def run_align(score_paths: list[Path], annotations_path: Path, out: Path,
              methods: list[str], by_model_method: str,
              release_dates: dict[str, str] | None,
              drift_input: Path | None) -> tuple[int, dict]:
    score_sets = []
    for path in score_paths:
        score_sets.extend(scoring.load_score_sets(path))
    annotations = human.load_annotations(annotations_path)
    records = human.records_from_annotations(annotations)

    reports = analytics.alignment_table(score_sets, records, methods=methods)
    if all(r.auroc is None and r.n_pos + r.n_neg == 0 for r in reports):
        raise ValueError(
            "empty join: no (prompt_id, model_id, rewritten) key is shared "
            "by the score sets and the annotations")

    out.mkdir(parents=True, exist_ok=True)
    (out / "alignment_table.tsv").write_text(
        analytics.render_alignment_table(reports), encoding="utf-8")
    with (out / "alignment_reports.jsonl").open("w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps({
                "method": r.method, "prompt_set": r.prompt_set, "auroc": r.auroc,
                "n_pos": r.n_pos, "n_neg": r.n_neg, "note": r.note,
            }) + "\n")

    by_model = analytics.alignment_by_model(score_sets, records, by_model_method,
                                            release_dates=release_dates)
    with (out / "alignment_by_model.jsonl").open("w", encoding="utf-8") as fh:
        for r in by_model:
            fh.write(json.dumps({
                "model_id": r.model_id, "method": r.method, "auroc": r.auroc,
                "n_pos": r.n_pos, "n_neg": r.n_neg, "note": r.note,
            }) + "\n")

    summary: dict = {"cells": len(reports),
                     "undefined_cells": sum(r.auroc is None for r in reports)}
    if drift_input is not None:
        entries = analytics.load_drift_entries(drift_input)
        series = analytics.drift_report(entries)
        analytics.save_drift_series(series, out / "drift.jsonl")
        (out / "drift_summary.json").write_text(
            json.dumps(series.summary(), indent=2) + "\n", encoding="utf-8")
        summary["drift"] = series.summary()
    return 0, summary


def cmd_align(args: argparse.Namespace) -> int:
    release_dates = None
    try:
        if args.release_dates:
            release_dates = json.loads(Path(args.release_dates).read_text(encoding="utf-8"))
        code, summary = run_align(
            [Path(p) for p in args.scores], Path(args.annotations), Path(args.out),
            methods=args.methods, by_model_method=args.by_model_method,
            release_dates=release_dates,
            drift_input=Path(args.drift_input) if args.drift_input else None,
        )
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    undefined = summary["undefined_cells"]
    print(f"wrote alignment reports to {args.out} "
          f"({summary['cells']} cells, {undefined} undefined)")
    return code


def cmd_subset(args: argparse.Namespace) -> int:
    """Stratified subset: the same fraction of every atomicity bucket,
    drawn deterministically from the given seed."""
    try:
        vocab = load_vocabulary(args.vocab)
        prompts = load_benchmark(args.benchmark, vocab)
        if not 0.0 < args.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {args.fraction}")
        buckets: dict[int, list[PromptSpec]] = {}
        for prompt in prompts:
            buckets.setdefault(prompt.atomicity, []).append(prompt)
        rng = random.Random(f"subset:{args.seed}")
        chosen: list[PromptSpec] = []
        for atomicity in sorted(buckets):
            bucket = sorted(buckets[atomicity], key=lambda p: p.id)
            take = max(1, round(args.fraction * len(bucket)))
            chosen.extend(rng.sample(bucket, take))
        save_benchmark(chosen, args.out)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {len(chosen)} of {len(prompts)} prompts to {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        from .server import build_app
        import uvicorn
        vocab = load_vocabulary(args.vocab)
        prompts = load_benchmark(args.benchmark, vocab)
        app = build_app(
            prompts=prompts, images_root=Path(args.images),
            store_path=Path(args.store), model_id=args.model_id,
            rewritten=args.rewritten, annotators_per_image=args.annotators_per_image,
            mode=args.mode, frontend_dir=Path(args.frontend) if args.frontend else None,
        )
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomeval",
        description="Compositional text-to-image benchmark and VQA evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="build the 800-prompt benchmark file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", default=None, help="vocabulary override file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("questions", help="emit the probe questions for a benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", default=None)
    p.set_defaults(func=cmd_questions)

    p = sub.add_parser("eval", help="score an image corpus against a benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--images", required=True,
                   help="directory of images named {prompt_id}.png/.jpg")
    p.add_argument("--model-id", required=True)
    p.add_argument("--rewritten", action="store_true",
                   help="tag the scores as rewritten-prompt images")
    p.add_argument("--backend", choices=("http", "mock-hash", "mock-fixture"),
                   default="http")
    p.add_argument("--backend-url", default=None)
    p.add_argument("--backend-model", default=None)
    p.add_argument("--api-key-env", default="ATOMEVAL_API_KEY")
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--greedy-fallback", action="store_true",
                   help="score 0/1 from greedy answers when the endpoint "
                        "has no log-probabilities")
    p.add_argument("--fixture", default=None,
                   help="JSON table question -> probability for mock-fixture")
    p.add_argument("--cache", default=None, help="judgment cache file")
    p.add_argument("--vocab", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rewrite", help="produce detailed rewrites via a text LLM")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--backend-url", required=True)
    p.add_argument("--backend-model", required=True)
    p.add_argument("--api-key-env", default="ATOMEVAL_API_KEY")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("align", help="human-alignment AUROC and drift reports")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--methods", nargs="+", default=list(scoring.METRICS))
    p.add_argument("--by-model-method", default="soft_tifa_gm")
    p.add_argument("--release-dates", default=None,
                   help="JSON mapping model_id -> ISO release date")
    p.add_argument("--drift-input", default=None,
                   help="JSONL of (model_id, release_date, reported_score, human_score)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("subset", help="stratified benchmark subset for labeling")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("serve", help="run the annotation server")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--store", required=True, help="annotations JSONL store")
    p.add_argument("--model-id", required=True)
    p.add_argument("--rewritten", action="store_true")
    p.add_argument("--annotators-per-image", type=int, default=1)
    p.add_argument("--mode", choices=("checklist", "legacy"), default="checklist")
    p.add_argument("--frontend", default=None,
                   help="directory of static frontend files to serve at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--vocab", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
