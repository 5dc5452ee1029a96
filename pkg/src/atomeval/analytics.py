"""Human-alignment AUROC and benchmark drift analytics.

AUROC is the probability a uniformly random human-correct image is scored
above a uniformly random incorrect one, ties credited half; it is computed
from tied ranks (Mann-Whitney), so it is invariant under strictly
increasing score transforms. Labels are human prompt-level booleans.
Undefined cells (empty joins, single-class labels) are reported as
undefined with a diagnostic rather than imputed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .human import HumanScoreRecord
from .scoring import METRICS, ScoreSet

PROMPT_SETS = ("original", "rewritten", "both")


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Rank-based AUROC with average ranks on ties."""
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores vs {len(labels)} labels")
    if not scores:
        raise ValueError("auroc needs at least one observation")
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(
            "auroc is undefined with a single class "
            f"(n_pos={n_pos}, n_neg={n_neg})")
    ranks = rankdata(np.asarray(scores, dtype=float))
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class AlignmentReport:
    method: str
    prompt_set: str
    auroc: float | None
    n_pos: int
    n_neg: int
    model_id: str | None = None  # set for per-T2I-model reports
    note: str | None = None  # diagnostic when auroc is undefined


def _join(score_sets: Sequence[ScoreSet], records: Sequence[HumanScoreRecord],
          prompt_set: str, model_id: str | None = None
          ) -> tuple[list[ScoreSet], list[bool]]:
    """Pair each score set with its human prompt-level label on
    (prompt_id, model_id, rewritten)."""
    if prompt_set not in PROMPT_SETS:
        raise ValueError(f"unknown prompt set {prompt_set!r}; expected {PROMPT_SETS}")
    labels = {(r.prompt_id, r.model_id, r.rewritten): r.prompt_correct for r in records}
    joined: list[ScoreSet] = []
    truth: list[bool] = []
    for s in score_sets:
        if model_id is not None and s.model_id != model_id:
            continue
        if prompt_set == "original" and s.rewritten:
            continue
        if prompt_set == "rewritten" and not s.rewritten:
            continue
        key = (s.prompt_id, s.model_id, s.rewritten)
        if key in labels:
            joined.append(s)
            truth.append(labels[key])
    return joined, truth


def _cell_report(method: str, prompt_set: str, joined: list[ScoreSet],
                 truth: list[bool], model_id: str | None = None) -> AlignmentReport:
    n_pos = sum(truth)
    n_neg = len(truth) - n_pos
    if not truth:
        return AlignmentReport(method, prompt_set, None, 0, 0, model_id,
                               note="empty join: no scored image has a human label")
    if n_pos == 0 or n_neg == 0:
        return AlignmentReport(method, prompt_set, None, n_pos, n_neg, model_id,
                               note=f"single-class labels (n_pos={n_pos}, n_neg={n_neg})")
    value = auroc([s.value(method) for s in joined], truth)
    return AlignmentReport(method, prompt_set, value, n_pos, n_neg, model_id)


def alignment_table(score_sets: Sequence[ScoreSet],
                    records: Sequence[HumanScoreRecord],
                    methods: Sequence[str] = METRICS,
                    prompt_sets: Sequence[str] = PROMPT_SETS) -> list[AlignmentReport]:
    """One AUROC per (method, prompt set), pooling all T2I models;
    "both" pools original and rewritten images."""
    reports = []
    for method in methods:
        for prompt_set in prompt_sets:
            joined, truth = _join(score_sets, records, prompt_set)
            reports.append(_cell_report(method, prompt_set, joined, truth))
    return reports


def alignment_by_model(score_sets: Sequence[ScoreSet],
                       records: Sequence[HumanScoreRecord],
                       method: str,
                       release_dates: Mapping[str, str] | None = None,
                       prompt_set: str = "both") -> list[AlignmentReport]:
    """Per-T2I-model AUROC series for drift inspection, ordered by release
    date when dates are known (unknown models sort last, by name). Pools
    original and rewritten images by default."""
    models = sorted({s.model_id for s in score_sets})
    dates = release_dates or {}
    models.sort(key=lambda m: (dates.get(m) is None, dates.get(m, ""), m))
    reports = []
    for model_id in models:
        joined, truth = _join(score_sets, records, prompt_set, model_id=model_id)
        reports.append(_cell_report(method, prompt_set, joined, truth, model_id))
    return reports


# ---------------------------------------------------------------------------
# benchmark drift

@dataclass(frozen=True)
class DriftEntry:
    model_id: str
    release_date: str  # ISO-8601, sortable lexicographically
    reported_score: float
    human_score: float

    @property
    def net_deviation(self) -> float:
        return self.human_score - self.reported_score


@dataclass(frozen=True)
class DriftSeries:
    entries: tuple[DriftEntry, ...]  # sorted by release date
    max_abs_deviation: float
    max_abs_model: str
    trend_slope: float  # per release step, over the date-sorted series
    trend: str  # increasing | decreasing | flat

    def summary(self) -> dict:
        return {
            "models": len(self.entries),
            "max_abs_deviation": self.max_abs_deviation,
            "max_abs_model": self.max_abs_model,
            "trend_slope": self.trend_slope,
            "trend": self.trend,
        }


def drift_report(entries: Sequence[DriftEntry]) -> DriftSeries:
    """Net deviation (human minus reported) per model, sorted by release
    date, with the largest absolute deviation and the sign trend."""
    if not entries:
        raise ValueError("drift_report needs at least one entry")
    ordered = tuple(sorted(entries, key=lambda e: (e.release_date, e.model_id)))
    peak = max(ordered, key=lambda e: abs(e.net_deviation))
    deviations = [e.net_deviation for e in ordered]
    slope = 0.0
    if len(ordered) > 1:
        slope = float(np.polyfit(np.arange(len(ordered)), deviations, 1)[0])
    trend = "flat" if abs(slope) < 1e-9 else ("increasing" if slope > 0 else "decreasing")
    return DriftSeries(
        entries=ordered,
        max_abs_deviation=abs(peak.net_deviation),
        max_abs_model=peak.model_id,
        trend_slope=slope,
        trend=trend,
    )


def load_drift_entries(path: str | Path) -> list[DriftEntry]:
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            missing = [k for k in ("model_id", "release_date", "reported_score",
                                   "human_score") if k not in rec]
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {missing}")
            entries.append(DriftEntry(
                model_id=rec["model_id"], release_date=rec["release_date"],
                reported_score=float(rec["reported_score"]),
                human_score=float(rec["human_score"]),
            ))
    return entries


def save_drift_series(series: DriftSeries, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in series.entries:
            fh.write(json.dumps({
                "model_id": e.model_id,
                "release_date": e.release_date,
                "reported_score": e.reported_score,
                "human_score": e.human_score,
                "net_deviation": e.net_deviation,
            }) + "\n")


def render_alignment_table(reports: Iterable[AlignmentReport]) -> str:
    """Methods as rows, prompt sets as columns, AUROC in the cells
    ("undefined" where a cell has no valid join)."""
    cells: dict[tuple[str, str], AlignmentReport] = {}
    methods: list[str] = []
    sets: list[str] = []
    for r in reports:
        cells[(r.method, r.prompt_set)] = r
        if r.method not in methods:
            methods.append(r.method)
        if r.prompt_set not in sets:
            sets.append(r.prompt_set)
    lines = ["method\t" + "\t".join(sets)]
    for method in methods:
        row = [method]
        for prompt_set in sets:
            r = cells.get((method, prompt_set))
            row.append("undefined" if r is None or r.auroc is None else f"{r.auroc:.4f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
