"""Closed vocabulary for compositional prompt generation.

The default tables below are the complete word inventory: 40 objects
(20 animate / 20 inanimate, 20 COCO-sourced / 20 not), 18 attributes
(9 colors, 4 patterns, 5 materials), 9 relations (6 prepositions,
3 transitive verbs) and 6 count words (two..seven). An override file in
JSONL form can replace the whole inventory, but must satisfy the same
cardinalities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class VocabularyError(ValueError):
    """Raised when a vocabulary violates a structural invariant."""


@dataclass(frozen=True)
class ObjectEntry:
    lemma: str
    plural: str
    animate: bool
    coco_sourced: bool


@dataclass(frozen=True)
class AttributeEntry:
    word: str
    category: str  # color | pattern | material


@dataclass(frozen=True)
class RelationEntry:
    phrase: str
    kind: str  # preposition | verb


@dataclass(frozen=True)
class CountEntry:
    word: str
    value: int


# (lemma, plural, animate, coco_sourced)
_OBJECTS = [
    # animate
    ("bear", "bears", True, True),
    ("bird", "birds", True, True),
    ("cat", "cats", True, True),
    ("cow", "cows", True, True),
    ("dog", "dogs", True, True),
    ("elephant", "elephants", True, True),
    ("flamingo", "flamingos", True, False),
    ("giraffe", "giraffes", True, True),
    ("horse", "horses", True, True),
    ("kangaroo", "kangaroos", True, False),
    ("koala", "koalas", True, False),
    ("lion", "lions", True, False),
    ("monkey", "monkeys", True, False),
    ("penguin", "penguins", True, False),
    ("pig", "pigs", True, False),
    ("rabbit", "rabbits", True, False),
    ("raccoon", "raccoons", True, False),
    ("sheep", "sheep", True, True),
    ("turtle", "turtles", True, False),
    ("zebra", "zebras", True, True),
    # inanimate
    ("backpack", "backpacks", False, True),
    ("bagel", "bagels", False, False),
    ("bicycle", "bicycles", False, True),
    ("candle", "candles", False, False),
    ("car", "cars", False, True),
    ("chair", "chairs", False, True),
    ("clock", "clocks", False, True),
    ("cookie", "cookies", False, False),
    ("croissant", "croissants", False, False),
    ("donut", "donuts", False, True),
    ("flower", "flowers", False, False),
    ("guitar", "guitars", False, False),
    ("motorcycle", "motorcycles", False, True),
    ("mushroom", "mushrooms", False, False),
    ("suitcase", "suitcases", False, True),
    ("toy", "toys", False, False),
    ("truck", "trucks", False, True),
    ("trumpet", "trumpets", False, False),
    ("umbrella", "umbrellas", False, True),
    ("violin", "violins", False, False),
]

_ATTRIBUTES = [
    ("red", "color"),
    ("yellow", "color"),
    ("green", "color"),
    ("blue", "color"),
    ("purple", "color"),
    ("pink", "color"),
    ("brown", "color"),
    ("black", "color"),
    ("white", "color"),
    ("spotted", "pattern"),
    ("striped", "pattern"),
    ("checkered", "pattern"),
    ("sparkling", "pattern"),
    ("wooden", "material"),
    ("glass", "material"),
    ("plastic", "material"),
    ("metal", "material"),
    ("stone", "material"),
]

_RELATIONS = [
    ("to the left of", "preposition"),
    ("to the right of", "preposition"),
    ("on top of", "preposition"),
    ("under", "preposition"),
    ("in front of", "preposition"),
    ("behind", "preposition"),
    ("chasing", "verb"),
    ("playing with", "verb"),
    ("jumping over", "verb"),
]

_COUNTS = [
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
]

# Words whose article does not follow the leading-vowel-letter rule
# (none in the default vocabulary; override vocabularies may need them,
# e.g. "unicorn" -> "a", "hour" -> "an").
ARTICLE_EXCEPTIONS: dict[str, str] = {}


def indefinite_article(word: str) -> str:
    """Return "a" or "an" for the word that will directly follow it."""
    if word in ARTICLE_EXCEPTIONS:
        return ARTICLE_EXCEPTIONS[word]
    return "an" if word[:1].lower() in "aeiou" else "a"


@dataclass(frozen=True)
class Vocabulary:
    objects: tuple[ObjectEntry, ...]
    attributes: tuple[AttributeEntry, ...]
    relations: tuple[RelationEntry, ...]
    counts: tuple[CountEntry, ...]
    _object_by_lemma: dict[str, ObjectEntry] = field(init=False, repr=False, compare=False)
    _object_by_plural: dict[str, ObjectEntry] = field(init=False, repr=False, compare=False)
    _attribute_by_word: dict[str, AttributeEntry] = field(init=False, repr=False, compare=False)
    _relation_by_phrase: dict[str, RelationEntry] = field(init=False, repr=False, compare=False)
    _count_by_word: dict[str, CountEntry] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _validate(self)
        object.__setattr__(self, "_object_by_lemma", {o.lemma: o for o in self.objects})
        object.__setattr__(self, "_object_by_plural", {o.plural: o for o in self.objects})
        object.__setattr__(self, "_attribute_by_word", {a.word: a for a in self.attributes})
        object.__setattr__(self, "_relation_by_phrase", {r.phrase: r for r in self.relations})
        object.__setattr__(self, "_count_by_word", {c.word: c for c in self.counts})

    @property
    def animate_objects(self) -> tuple[ObjectEntry, ...]:
        return tuple(o for o in self.objects if o.animate)

    def object_by_lemma(self, lemma: str) -> ObjectEntry | None:
        return self._object_by_lemma.get(lemma)

    def object_by_plural(self, plural: str) -> ObjectEntry | None:
        return self._object_by_plural.get(plural)

    def attribute(self, word: str) -> AttributeEntry | None:
        return self._attribute_by_word.get(word)

    def relation(self, phrase: str) -> RelationEntry | None:
        return self._relation_by_phrase.get(phrase)

    def count(self, word: str) -> CountEntry | None:
        return self._count_by_word.get(word)


def _require(condition: bool, invariant: str) -> None:
    if not condition:
        raise VocabularyError(f"vocabulary invariant violated: {invariant}")


def _validate(vocab: Vocabulary) -> None:
    objects, attributes, relations, counts = (
        vocab.objects, vocab.attributes, vocab.relations, vocab.counts,
    )
    _require(len(objects) == 40, f"expected 40 objects, got {len(objects)}")
    _require(sum(o.animate for o in objects) == 20,
             f"expected 20 animate objects, got {sum(o.animate for o in objects)}")
    _require(sum(o.coco_sourced for o in objects) == 20,
             f"expected 20 COCO-sourced objects, got {sum(o.coco_sourced for o in objects)}")
    _require(len({o.lemma for o in objects}) == len(objects), "object lemmas must be unique")
    _require(all(o.plural for o in objects), "object plural forms must be nonempty")

    _require(len(attributes) == 18, f"expected 18 attributes, got {len(attributes)}")
    by_cat = {"color": 9, "pattern": 4, "material": 5}
    for cat, expected in by_cat.items():
        got = sum(a.category == cat for a in attributes)
        _require(got == expected, f"expected {expected} {cat} attributes, got {got}")
    _require(all(a.category in by_cat for a in attributes), "unknown attribute category")

    _require(len(relations) == 9, f"expected 9 relations, got {len(relations)}")
    _require(sum(r.kind == "preposition" for r in relations) == 6,
             "expected 6 preposition relations")
    _require(sum(r.kind == "verb" for r in relations) == 3, "expected 3 verb relations")
    _require(all(r.kind in ("preposition", "verb") for r in relations), "unknown relation kind")

    _require(len(counts) == 6, f"expected 6 counts, got {len(counts)}")
    _require(sorted(c.value for c in counts) == [2, 3, 4, 5, 6, 7],
             "count values must be exactly 2..7")
    _require(len({c.word for c in counts}) == 6, "count words must be unique")

    # no surface form may appear in two categories
    surfaces: list[str] = [o.lemma for o in objects]
    surfaces += [a.word for a in attributes]
    surfaces += [r.phrase for r in relations]
    surfaces += [c.word for c in counts]
    _require(len(set(surfaces)) == len(surfaces), "a word appears in more than one category")


def default_vocabulary() -> Vocabulary:
    return Vocabulary(
        objects=tuple(ObjectEntry(*row) for row in _OBJECTS),
        attributes=tuple(AttributeEntry(*row) for row in _ATTRIBUTES),
        relations=tuple(RelationEntry(*row) for row in _RELATIONS),
        counts=tuple(CountEntry(*row) for row in _COUNTS),
    )


def load_vocabulary(override_path: str | Path | None = None) -> Vocabulary:
    """Load the embedded vocabulary, or a full replacement from a JSONL file.

    Override records carry a "surface" and a "category" plus per-category
    fields: objects need plural/animate/coco, attributes need subtype,
    relations need kind, counts need value. The override must satisfy the
    same cardinality invariants as the default vocabulary.
    """
    if override_path is None:
        return default_vocabulary()
    return _load_override(Path(override_path))


def _load_override(path: Path) -> Vocabulary:
    objects: list[ObjectEntry] = []
    attributes: list[AttributeEntry] = []
    relations: list[RelationEntry] = []
    counts: list[CountEntry] = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VocabularyError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        try:
            category = rec["category"]
            surface = rec["surface"]
            if category == "object":
                objects.append(ObjectEntry(
                    lemma=surface, plural=rec["plural"],
                    animate=bool(rec["animate"]), coco_sourced=bool(rec["coco"]),
                ))
            elif category == "attribute":
                attributes.append(AttributeEntry(word=surface, category=rec["subtype"]))
            elif category == "relation":
                relations.append(RelationEntry(phrase=surface, kind=rec["kind"]))
            elif category == "count":
                counts.append(CountEntry(word=surface, value=int(rec["value"])))
            else:
                raise VocabularyError(f"{path}:{lineno}: unknown category {category!r}")
        except KeyError as exc:
            raise VocabularyError(f"{path}:{lineno}: missing field {exc}") from exc
    return Vocabulary(
        objects=tuple(objects), attributes=tuple(attributes),
        relations=tuple(relations), counts=tuple(counts),
    )


def _read_lines(path: Path) -> Iterable[str]:
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield line
