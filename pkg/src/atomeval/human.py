"""Human annotation store, majority voting, and human score derivation.

Two annotation modes coexist: per-atom checklists (one boolean per atom)
and the legacy single alignment boolean. The store is append-only; the
effective annotation per (image, annotator) is the latest by timestamp,
because annotators revise. The quality flag is stored but never enters
alignment scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

CHECKLIST = "checklist"
LEGACY = "legacy"


@dataclass(frozen=True)
class HumanAnnotation:
    prompt_id: str
    model_id: str
    rewritten: bool
    annotator_id: str
    quality: bool
    timestamp: float
    atom_labels: tuple[bool, ...] | None = None  # checklist mode
    alignment: bool | None = None  # legacy mode

    def __post_init__(self) -> None:
        if (self.atom_labels is None) == (self.alignment is None):
            raise ValueError(
                "an annotation carries either atom_labels or alignment, not both")

    @property
    def mode(self) -> str:
        return CHECKLIST if self.atom_labels is not None else LEGACY

    @property
    def image_key(self) -> tuple[str, str, bool]:
        return (self.prompt_id, self.model_id, self.rewritten)


@dataclass(frozen=True)
class HumanScoreRecord:
    prompt_id: str
    model_id: str
    rewritten: bool
    atom_correct: tuple[bool, ...]
    prompt_correct: bool

    def __post_init__(self) -> None:
        if self.prompt_correct != all(self.atom_correct):
            raise ValueError(
                f"prompt {self.prompt_id}: prompt_correct must be the "
                "conjunction of atom_correct")


def prompt_level(atom_correct: Sequence[bool]) -> bool:
    """An image is prompt-correct only if every atom is correct."""
    if not atom_correct:
        raise ValueError("prompt_level needs at least one atom label")
    return all(atom_correct)


def majority_vote(annotations: Sequence[HumanAnnotation]):
    """Per-field majority across an odd number of annotators for one image.

    Returns a tuple of booleans in checklist mode, a single boolean in
    legacy mode.
    """
    if not annotations:
        raise ValueError("majority_vote needs at least one annotation")
    if len(annotations) % 2 == 0:
        raise ValueError(f"annotator count must be odd, got {len(annotations)}")
    modes = {a.mode for a in annotations}
    if len(modes) != 1:
        raise ValueError("cannot vote across mixed annotation modes")
    if len({a.image_key for a in annotations}) != 1:
        raise ValueError("majority_vote expects annotations for a single image")
    if modes == {LEGACY}:
        yes = sum(a.alignment for a in annotations)  # type: ignore[misc]
        return yes * 2 > len(annotations)
    lengths = {len(a.atom_labels) for a in annotations}  # type: ignore[arg-type]
    if len(lengths) != 1:
        raise ValueError(f"checklist lengths differ: {sorted(lengths)}")
    n_atoms = lengths.pop()
    return tuple(
        sum(a.atom_labels[i] for a in annotations) * 2 > len(annotations)  # type: ignore[index]
        for i in range(n_atoms)
    )


def effective_annotations(annotations: Iterable[HumanAnnotation]) -> list[HumanAnnotation]:
    """Latest annotation per (image, annotator); input order breaks timestamp ties."""
    latest: dict[tuple, HumanAnnotation] = {}
    for a in annotations:
        key = (*a.image_key, a.annotator_id)
        if key not in latest or a.timestamp >= latest[key].timestamp:
            latest[key] = a
    return list(latest.values())


def group_by_image(annotations: Iterable[HumanAnnotation]
                   ) -> dict[tuple[str, str, bool], list[HumanAnnotation]]:
    groups: dict[tuple[str, str, bool], list[HumanAnnotation]] = {}
    for a in annotations:
        groups.setdefault(a.image_key, []).append(a)
    return groups


def records_from_annotations(annotations: Iterable[HumanAnnotation]) -> list[HumanScoreRecord]:
    """Majority-voted score record per image. Legacy annotations become
    single-atom records, so prompt_correct equals the alignment vote."""
    groups = group_by_image(effective_annotations(annotations))
    records = []
    for key in sorted(groups):
        voted = majority_vote(groups[key])
        atom_correct = voted if isinstance(voted, tuple) else (voted,)
        records.append(HumanScoreRecord(
            prompt_id=key[0], model_id=key[1], rewritten=key[2],
            atom_correct=atom_correct, prompt_correct=all(atom_correct),
        ))
    return records


def unanimity_rate(annotations: Sequence[HumanAnnotation]) -> float:
    """Fraction of images whose annotators all agree on alignment.

    Checklist annotations agree when their label vectors are identical.
    Every image must have the same annotator count (>= 2).
    """
    groups = group_by_image(effective_annotations(annotations))
    if not groups:
        raise ValueError("unanimity_rate needs a nonempty corpus")
    counts = {len(g) for g in groups.values()}
    if len(counts) != 1 or counts.pop() < 2:
        raise ValueError("every image needs the same annotator count, at least 2")
    unanimous = 0
    for group in groups.values():
        if len({a.mode for a in group}) != 1:
            raise ValueError("cannot compare agreement across mixed modes")
        answers = {a.atom_labels if a.mode == CHECKLIST else a.alignment for a in group}
        unanimous += len(answers) == 1
    return unanimous / len(groups)


def human_scores(records: Sequence[HumanScoreRecord], level: str) -> float:
    """Atom level: mean over every atom of every record. Prompt level: mean
    of the per-image conjunctions."""
    if not records:
        raise ValueError("human_scores needs at least one record")
    if level == "atom":
        labels = [bool(x) for r in records for x in r.atom_correct]
        return sum(labels) / len(labels)
    if level == "prompt":
        return sum(r.prompt_correct for r in records) / len(records)
    raise ValueError(f"unknown level {level!r}; expected 'atom' or 'prompt'")


# ---------------------------------------------------------------------------
# annotation file format

def annotation_to_record(a: HumanAnnotation) -> dict:
    rec = {
        "prompt_id": a.prompt_id,
        "model_id": a.model_id,
        "rewritten": a.rewritten,
        "annotator_id": a.annotator_id,
        "quality": a.quality,
        "timestamp": a.timestamp,
    }
    if a.atom_labels is not None:
        rec["atom_labels"] = list(a.atom_labels)
    else:
        rec["alignment"] = a.alignment
    return rec


def annotation_from_record(rec: dict) -> HumanAnnotation:
    labels = rec.get("atom_labels")
    return HumanAnnotation(
        prompt_id=rec["prompt_id"],
        model_id=rec["model_id"],
        rewritten=bool(rec["rewritten"]),
        annotator_id=rec["annotator_id"],
        quality=bool(rec["quality"]),
        timestamp=float(rec["timestamp"]),
        atom_labels=tuple(bool(x) for x in labels) if labels is not None else None,
        alignment=bool(rec["alignment"]) if labels is None else None,
    )


def append_annotation(a: HumanAnnotation, path: str | Path) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(annotation_to_record(a)) + "\n")


def load_annotations(path: str | Path) -> list[HumanAnnotation]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(annotation_from_record(json.loads(line)))
    return out


def validate_annotations(annotations: Iterable[HumanAnnotation],
                         atomicity_by_id: dict[str, int]) -> None:
    """Import gate: checklist lengths must equal the prompt's atomicity."""
    for a in annotations:
        if a.atom_labels is None:
            continue
        expected = atomicity_by_id.get(a.prompt_id)
        if expected is None:
            raise ValueError(f"annotation for unknown prompt {a.prompt_id!r}")
        if len(a.atom_labels) != expected:
            raise ValueError(
                f"prompt {a.prompt_id}: checklist length {len(a.atom_labels)} "
                f"does not match atomicity {expected}")
