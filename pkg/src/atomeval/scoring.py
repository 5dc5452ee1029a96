"""Per-image scores and benchmark-level aggregation.

Four scores per image: the whole-prompt "Yes" probability, the fraction of
per-atom greedy answers that match, and the arithmetic/geometric means of
the per-atom probabilities. The geometric mean runs in log space and is
exactly 0 whenever any atom probability is 0; no epsilon floor is applied
by default, since its whole point is punishing failed atoms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .backend import FULL_PROMPT, Judgment, normalize_answer
from .grammar import SKILL_ORDER, PromptSpec, atom_skill

METRICS = ("vqascore", "tifa", "soft_tifa_am", "soft_tifa_gm")

ARITHMETIC = "arithmetic"
GEOMETRIC = "geometric"

GROUPINGS = ("skill", "atomicity", "model", "rewritten")


@dataclass(frozen=True)
class ScoreSet:
    prompt_id: str
    model_id: str
    rewritten: bool
    vqascore: float
    tifa: float
    soft_tifa_am: float
    soft_tifa_gm: float

    def value(self, metric: str) -> float:
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        return getattr(self, metric)


def vqascore(judgment: Judgment) -> float:
    """The whole-prompt probe's probability, unchanged."""
    if judgment.atom_id != FULL_PROMPT:
        raise ValueError(
            f"vqascore needs the {FULL_PROMPT} judgment, got atom {judgment.atom_id}")
    return judgment.probability


def tifa_score(judgments: Sequence[Judgment], expected: str = "Yes") -> float:
    """Fraction of per-atom greedy answers matching the expected answer."""
    if not judgments:
        raise ValueError("tifa_score needs at least one judgment")
    target = normalize_answer(expected)
    matches = sum(normalize_answer(j.greedy_answer) == target for j in judgments)
    return matches / len(judgments)


def soft_tifa(judgments: Sequence[Judgment], mean_kind: str = ARITHMETIC,
              floor: float | None = None) -> float:
    """Mean of the per-atom probabilities, arithmetic or geometric."""
    if not judgments:
        raise ValueError("soft_tifa needs at least one judgment")
    probs = [j.probability for j in judgments]
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError(f"probabilities outside [0, 1]: {probs}")
    if mean_kind not in (ARITHMETIC, GEOMETRIC):
        raise ValueError(f"unknown mean kind {mean_kind!r}")
    if floor is not None:
        probs = [max(p, floor) for p in probs]
    if min(probs) == max(probs):
        return probs[0]  # either mean of identical values, exactly
    if mean_kind == ARITHMETIC:
        return sum(probs) / len(probs)
    if any(p == 0.0 for p in probs):
        return 0.0
    return math.exp(sum(math.log(p) for p in probs) / len(probs))


def score_image(prompt: PromptSpec, full_judgment: Judgment,
                atom_judgments: Sequence[Judgment], model_id: str,
                rewritten: bool = False) -> ScoreSet:
    """Assemble the four per-image scores for one (prompt, image) pair."""
    if len(atom_judgments) != prompt.atomicity:
        raise ValueError(
            f"prompt {prompt.id}: expected {prompt.atomicity} atom judgments, "
            f"got {len(atom_judgments)}")
    return ScoreSet(
        prompt_id=prompt.id,
        model_id=model_id,
        rewritten=rewritten,
        vqascore=vqascore(full_judgment),
        tifa=tifa_score(atom_judgments),
        soft_tifa_am=soft_tifa(atom_judgments, ARITHMETIC),
        soft_tifa_gm=soft_tifa(atom_judgments, GEOMETRIC),
    )


def aggregate_benchmark(score_sets: Sequence[ScoreSet], metric: str) -> float:
    """Arithmetic mean of one metric over the scored images."""
    if not score_sets:
        raise ValueError("aggregate_benchmark needs at least one score set")
    return sum(s.value(metric) for s in score_sets) / len(score_sets)


# ---------------------------------------------------------------------------
# rollups

@dataclass(frozen=True)
class MetricValue:
    """One observation for a rollup: atom-level values carry a skill,
    prompt-level values carry an atomicity."""
    metric: str
    value: float
    prompt_id: str
    model_id: str = ""
    rewritten: bool = False
    atomicity: int | None = None
    skill: str | None = None


@dataclass(frozen=True)
class RollupRow:
    group: str
    metric: str
    mean: float
    n: int


@dataclass(frozen=True)
class RollupTable:
    grouping: str
    rows: tuple[RollupRow, ...]


def rollup(values: Sequence[MetricValue], grouping: str) -> RollupTable:
    """Group means: per-skill over atom-level values, per-atomicity /
    per-model / per-rewritten over prompt-level values. Row order is
    deterministic (canonical skill order, numeric atomicities, then names)."""
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")
    if not values:
        raise ValueError("rollup needs at least one value")
    buckets: dict[tuple[str, str], list[float]] = {}
    for v in values:
        if not 0.0 <= v.value <= 1.0:
            raise ValueError(f"rollup value outside [0, 1]: {v}")
        key = (_group_key(v, grouping), v.metric)
        buckets.setdefault(key, []).append(v.value)
    rows = tuple(
        RollupRow(group=group, metric=metric,
                  mean=sum(vals) / len(vals), n=len(vals))
        for (group, metric), vals in sorted(
            buckets.items(), key=lambda kv: (_group_sort_key(kv[0][0], grouping), kv[0][1]))
    )
    return RollupTable(grouping=grouping, rows=rows)


def _group_key(v: MetricValue, grouping: str) -> str:
    if grouping == "skill":
        if v.skill is None:
            raise ValueError(f"value for prompt {v.prompt_id} has no skill")
        return v.skill
    if grouping == "atomicity":
        if v.atomicity is None:
            raise ValueError(f"value for prompt {v.prompt_id} has no atomicity")
        return str(v.atomicity)
    if grouping == "model":
        return v.model_id
    return "rewritten" if v.rewritten else "original"


def _group_sort_key(group: str, grouping: str):
    if grouping == "skill":
        return (SKILL_ORDER.index(group) if group in SKILL_ORDER else len(SKILL_ORDER),)
    if grouping == "atomicity":
        return (int(group),)
    return (group,)


def atom_values(prompt: PromptSpec, atom_judgments: Sequence[Judgment],
                model_id: str = "", rewritten: bool = False,
                metric: str = "atom_probability") -> list[MetricValue]:
    """Per-atom probabilities labeled with each atom's skill, for per-skill
    rollups of the soft scores."""
    by_atom = {j.atom_id: j for j in atom_judgments}
    out = []
    for atom in prompt.atoms:
        judgment = by_atom.get(atom.id)
        if judgment is None:
            raise ValueError(f"prompt {prompt.id}: no judgment for atom {atom.id}")
        out.append(MetricValue(
            metric=metric, value=judgment.probability, prompt_id=prompt.id,
            model_id=model_id, rewritten=rewritten,
            skill=atom_skill(atom, prompt.config),
        ))
    return out


def prompt_values(score_sets: Sequence[ScoreSet], metric: str,
                  atomicity_by_id: dict[str, int] | None = None) -> list[MetricValue]:
    """Prompt-level metric values, with atomicity attached when a benchmark
    index is provided."""
    out = []
    for s in score_sets:
        atomicity = atomicity_by_id.get(s.prompt_id) if atomicity_by_id else None
        out.append(MetricValue(
            metric=metric, value=s.value(metric), prompt_id=s.prompt_id,
            model_id=s.model_id, rewritten=s.rewritten, atomicity=atomicity,
        ))
    return out


# ---------------------------------------------------------------------------
# files and reports

def save_score_sets(score_sets: Iterable[ScoreSet], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in score_sets:
            fh.write(json.dumps({
                "prompt_id": s.prompt_id,
                "model_id": s.model_id,
                "rewritten": s.rewritten,
                "vqascore": s.vqascore,
                "tifa": s.tifa,
                "soft_tifa_am": s.soft_tifa_am,
                "soft_tifa_gm": s.soft_tifa_gm,
            }) + "\n")


def load_score_sets(path: str | Path) -> list[ScoreSet]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out.append(ScoreSet(
                    prompt_id=rec["prompt_id"], model_id=rec["model_id"],
                    rewritten=bool(rec["rewritten"]), vqascore=rec["vqascore"],
                    tifa=rec["tifa"], soft_tifa_am=rec["soft_tifa_am"],
                    soft_tifa_gm=rec["soft_tifa_gm"],
                ))
    return out


def render_rollup(table: RollupTable) -> str:
    """Tab-separated rollup table with a header row."""
    lines = [f"{table.grouping}\tmetric\tmean\tn"]
    for row in table.rows:
        lines.append(f"{row.group}\t{row.metric}\t{row.mean:.6f}\t{row.n}")
    return "\n".join(lines) + "\n"


def render_summary(score_sets: Sequence[ScoreSet]) -> str:
    """Human-readable benchmark means for all four metrics."""
    if not score_sets:
        return "no scored images\n"
    lines = [f"scored images: {len(score_sets)}"]
    for metric in METRICS:
        lines.append(f"  {metric:14s} {aggregate_benchmark(score_sets, metric):.4f}")
    return "\n".join(lines) + "\n"
