"""Compositional prompt grammar: generation, rendering, parsing, benchmark build.

A prompt is 1-3 object groups joined by connectors. Each group fills the
slots {count or "a"}{attribute}{object}; each connector is a relation
phrase or the filler "and". Atomicity counts the filled count, attribute
and object slots plus relation connectors; "a" and "and" never count.
"""

from __future__ import annotations

import functools
import itertools
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .vocabulary import (
    AttributeEntry,
    CountEntry,
    ObjectEntry,
    RelationEntry,
    Vocabulary,
    indefinite_article,
)

KIND_OBJECT = "Object"
KIND_ATTRIBUTE = "Attribute"
KIND_COUNT = "Count"
KIND_RELATION = "Relation"

SKILL_OBJECT = "Object"
SKILL_ATTRIBUTE = "Attribute"
SKILL_COUNT = "Count"
SKILL_POSITION = "Position"
SKILL_VERB = "Verb"
SKILL_ORDER = (SKILL_OBJECT, SKILL_ATTRIBUTE, SKILL_COUNT, SKILL_POSITION, SKILL_VERB)

MIN_BENCHMARK_ATOMICITY = 3
MAX_BENCHMARK_ATOMICITY = 10
PROMPTS_PER_ATOMICITY = 100


class PromptParseError(ValueError):
    """Parse failure, carrying the token position where it occurred."""

    def __init__(self, message: str, position: int):
        super().__init__(f"at token {position}: {message}")
        self.position = position


@dataclass(frozen=True)
class Group:
    object: ObjectEntry
    attribute: AttributeEntry | None = None
    count: CountEntry | None = None


@dataclass(frozen=True)
class Connector:
    relation: RelationEntry | None = None  # None renders as "and"


@dataclass(frozen=True)
class SlotConfig:
    groups: tuple[Group, ...]
    connectors: tuple[Connector, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.groups) <= 3:
            raise ValueError(f"a prompt has 1-3 object groups, got {len(self.groups)}")
        if len(self.connectors) != len(self.groups) - 1:
            raise ValueError("connector count must be group count minus one")
        lemmas = [g.object.lemma for g in self.groups]
        if len(set(lemmas)) != len(lemmas):
            raise ValueError(f"object lemmas must be distinct, got {lemmas}")
        for i, conn in enumerate(self.connectors):
            if conn.relation is not None and conn.relation.kind == "verb":
                left, right = self.groups[i].object, self.groups[i + 1].object
                if not (left.animate and right.animate):
                    raise ValueError(
                        f"verb relation {conn.relation.phrase!r} requires animate "
                        f"operands, got {left.lemma!r} and {right.lemma!r}"
                    )


@dataclass(frozen=True)
class Atom:
    id: int
    kind: str
    surface: str
    subject_group: int
    object_group: int | None = None  # set for Relation atoms only


@dataclass(frozen=True)
class PromptSpec:
    id: str
    config: SlotConfig
    text: str
    atoms: tuple[Atom, ...]
    atomicity: int
    skills: frozenset[str]
    rewritten_text: str | None = None


def compute_atomicity(config: SlotConfig) -> int:
    """Count filled object/attribute/count slots plus relation connectors."""
    total = 0
    for group in config.groups:
        total += 1  # the object slot is always filled
        total += group.attribute is not None
        total += group.count is not None
    total += sum(conn.relation is not None for conn in config.connectors)
    return total


def object_surface(group: Group) -> str:
    """Rendered object form: plural when the group carries a count."""
    return group.object.plural if group.count is not None else group.object.lemma


def render_prompt(config: SlotConfig) -> str:
    """Deterministic English rendering of a slot configuration."""
    parts: list[str] = []
    for i, group in enumerate(config.groups):
        if i > 0:
            conn = config.connectors[i - 1]
            parts.append(conn.relation.phrase if conn.relation else "and")
        words: list[str] = []
        if group.attribute is not None:
            words.append(group.attribute.word)
        words.append(object_surface(group))
        if group.count is not None:
            words.insert(0, group.count.word)
        else:
            words.insert(0, indefinite_article(words[0]))
        parts.append(" ".join(words))
    return " ".join(parts)


def atoms_from_config(config: SlotConfig) -> tuple[Atom, ...]:
    """Atoms in template order: count, attribute, object per group, then the
    relation connector that follows the group."""
    atoms: list[Atom] = []
    for i, group in enumerate(config.groups):
        if group.count is not None:
            atoms.append(Atom(len(atoms), KIND_COUNT, group.count.word, i))
        if group.attribute is not None:
            atoms.append(Atom(len(atoms), KIND_ATTRIBUTE, group.attribute.word, i))
        atoms.append(Atom(len(atoms), KIND_OBJECT, object_surface(group), i))
        if i < len(config.connectors):
            relation = config.connectors[i].relation
            if relation is not None:
                atoms.append(Atom(len(atoms), KIND_RELATION, relation.phrase, i, i + 1))
    return tuple(atoms)


def label_skills(config: SlotConfig) -> frozenset[str]:
    skills = {SKILL_OBJECT}
    if any(g.attribute is not None for g in config.groups):
        skills.add(SKILL_ATTRIBUTE)
    if any(g.count is not None for g in config.groups):
        skills.add(SKILL_COUNT)
    for conn in config.connectors:
        if conn.relation is None:
            continue
        skills.add(SKILL_POSITION if conn.relation.kind == "preposition" else SKILL_VERB)
    return frozenset(skills)


def atom_skill(atom: Atom, config: SlotConfig) -> str:
    """Skill category of a single atom (relations split into Position/Verb)."""
    if atom.kind == KIND_RELATION:
        relation = config.connectors[atom.subject_group].relation
        assert relation is not None
        return SKILL_POSITION if relation.kind == "preposition" else SKILL_VERB
    return atom.kind


def build_prompt_spec(prompt_id: str, config: SlotConfig,
                      rewritten_text: str | None = None) -> PromptSpec:
    return PromptSpec(
        id=prompt_id,
        config=config,
        text=render_prompt(config),
        atoms=atoms_from_config(config),
        atomicity=compute_atomicity(config),
        skills=label_skills(config),
        rewritten_text=rewritten_text,
    )


# ---------------------------------------------------------------------------
# parsing

def parse_prompt(text: str, vocab: Vocabulary) -> SlotConfig:
    """Inverse of render_prompt over the given vocabulary.

    Raises PromptParseError (with token position) on unknown words,
    malformed slot order, article/plural disagreement, or configurations
    violating the grammar constraints.
    """
    tokens = text.split()
    if not tokens:
        raise PromptParseError("empty prompt", 0)
    pos = 0
    groups: list[Group] = []
    connectors: list[Connector] = []
    while True:
        group, pos = _parse_group(tokens, pos, vocab)
        groups.append(group)
        if pos == len(tokens):
            break
        connector, pos = _parse_connector(tokens, pos, vocab)
        connectors.append(connector)
        if pos == len(tokens):
            raise PromptParseError("prompt ends after a connector", pos)
    try:
        return SlotConfig(groups=tuple(groups), connectors=tuple(connectors))
    except ValueError as exc:
        raise PromptParseError(str(exc), len(tokens)) from exc


def _parse_group(tokens: list[str], pos: int, vocab: Vocabulary) -> tuple[Group, int]:
    start = pos
    token = tokens[pos]
    count: CountEntry | None = None
    article: str | None = None
    if token in ("a", "an"):
        article = token
    else:
        count = vocab.count(token)
        if count is None:
            raise PromptParseError(
                f"expected an article or count word, got {token!r}", pos)
    pos += 1
    if pos == len(tokens):
        raise PromptParseError("prompt ends inside an object group", pos)

    attribute = vocab.attribute(tokens[pos])
    if attribute is not None:
        pos += 1
        if pos == len(tokens):
            raise PromptParseError("prompt ends before the object word", pos)

    token = tokens[pos]
    if count is not None:
        obj = vocab.object_by_plural(token)
    else:
        obj = vocab.object_by_lemma(token)
    if obj is None:
        if _known_word(token, vocab):
            raise PromptParseError(
                f"expected an object {'plural' if count else 'lemma'}, got {token!r}", pos)
        raise PromptParseError(f"unknown word {token!r}", pos)
    pos += 1

    if article is not None:
        first_word = attribute.word if attribute is not None else obj.lemma
        expected = indefinite_article(first_word)
        if article != expected:
            raise PromptParseError(
                f"expected article {expected!r} before {first_word!r}, got {article!r}",
                start)
    return Group(object=obj, attribute=attribute, count=count), pos


def _parse_connector(tokens: list[str], pos: int, vocab: Vocabulary) -> tuple[Connector, int]:
    if tokens[pos] == "and":
        return Connector(None), pos + 1
    # longest relation phrase first, so "to the left of" wins over prefixes
    for relation in sorted(vocab.relations, key=lambda r: -len(r.phrase.split())):
        words = relation.phrase.split()
        if tokens[pos:pos + len(words)] == words:
            return Connector(relation), pos + len(words)
    if _known_word(tokens[pos], vocab):
        raise PromptParseError(
            f"expected a relation or 'and', got {tokens[pos]!r}", pos)
    raise PromptParseError(f"unknown word {tokens[pos]!r}", pos)


def _known_word(token: str, vocab: Vocabulary) -> bool:
    return (
        token in ("a", "an", "and")
        or vocab.object_by_lemma(token) is not None
        or vocab.object_by_plural(token) is not None
        or vocab.attribute(token) is not None
        or vocab.count(token) is not None
        or any(token in r.phrase.split() for r in vocab.relations)
    )


# ---------------------------------------------------------------------------
# shape enumeration and sampling

@dataclass(frozen=True, order=True)
class Shape:
    """Boolean fill pattern: (has_count, has_attribute) per group and
    has_relation per connector."""
    group_flags: tuple[tuple[bool, bool], ...]
    relation_flags: tuple[bool, ...]

    @property
    def atomicity(self) -> int:
        return (len(self.group_flags)
                + sum(c + a for c, a in self.group_flags)
                + sum(self.relation_flags))


MAX_ATOMICITY = 11  # 3 fully-filled groups plus 2 relations


@functools.lru_cache(maxsize=None)
def enumerate_shapes(target_atomicity: int) -> tuple[Shape, ...]:
    """All shapes over <=3 groups whose filled-slot count equals the target,
    in a canonical deterministic order (empty outside 1..11)."""
    shapes: list[Shape] = []
    for n_groups in (1, 2, 3):
        group_options = itertools.product(
            *[[(False, False), (False, True), (True, False), (True, True)]] * n_groups)
        for group_flags in group_options:
            for relation_flags in itertools.product([False, True], repeat=n_groups - 1):
                shape = Shape(tuple(group_flags), tuple(relation_flags))
                if shape.atomicity == target_atomicity:
                    shapes.append(shape)
    return tuple(sorted(shapes))


def sample_config(target_atomicity: int, rng: random.Random,
                  vocab: Vocabulary) -> SlotConfig:
    """Uniform shape draw, then uniform slot fills with rejection on the
    verb-animacy constraint (the shape is kept across rejections)."""
    shapes = enumerate_shapes(target_atomicity)
    if not shapes:
        raise ValueError(f"no prompt shape has atomicity {target_atomicity}")
    shape = shapes[rng.randrange(len(shapes))]
    while True:
        objects = rng.sample(vocab.objects, len(shape.group_flags))
        groups = tuple(
            Group(
                object=objects[i],
                attribute=rng.choice(vocab.attributes) if has_attr else None,
                count=rng.choice(vocab.counts) if has_count else None,
            )
            for i, (has_count, has_attr) in enumerate(shape.group_flags)
        )
        connectors = tuple(
            Connector(rng.choice(vocab.relations)) if flag else Connector(None)
            for flag in shape.relation_flags
        )
        if _verbs_animate(groups, connectors):
            return SlotConfig(groups=groups, connectors=connectors)


def _verbs_animate(groups: tuple[Group, ...], connectors: tuple[Connector, ...]) -> bool:
    for i, conn in enumerate(connectors):
        if conn.relation is not None and conn.relation.kind == "verb":
            if not (groups[i].object.animate and groups[i + 1].object.animate):
                return False
    return True


def sample_prompt(target_atomicity: int, seed: int | str, vocab: Vocabulary,
                  prompt_id: str | None = None) -> PromptSpec:
    if not MIN_BENCHMARK_ATOMICITY <= target_atomicity <= MAX_BENCHMARK_ATOMICITY:
        raise ValueError(
            f"benchmark atomicity must be in [{MIN_BENCHMARK_ATOMICITY}, "
            f"{MAX_BENCHMARK_ATOMICITY}], got {target_atomicity}")
    rng = random.Random(f"sample:{seed}:{target_atomicity}")
    config = sample_config(target_atomicity, rng, vocab)
    if prompt_id is None:
        prompt_id = f"sample-{target_atomicity}-{seed}"
    return build_prompt_spec(prompt_id, config)


def build_benchmark(seed: int = 0, vocab: Vocabulary | None = None) -> list[PromptSpec]:
    """100 prompts per atomicity 3..10, pairwise-distinct texts, stable ids,
    deterministic for a given seed.

    Duplicate renderings are resolved by redrawing that slot with an
    incremented sub-seed, so earlier prompts never move when a collision
    occurs. The realized skill mix per atomicity bucket is whatever the
    uniform draw produces; it is recorded in the output, not balanced.
    """
    if vocab is None:
        from .vocabulary import default_vocabulary
        vocab = default_vocabulary()
    prompts: list[PromptSpec] = []
    seen_texts: set[str] = set()
    for atomicity in range(MIN_BENCHMARK_ATOMICITY, MAX_BENCHMARK_ATOMICITY + 1):
        for index in range(PROMPTS_PER_ATOMICITY):
            attempt = 0
            while True:
                rng = random.Random(f"bench:{seed}:{atomicity}:{index}:{attempt}")
                config = sample_config(atomicity, rng, vocab)
                text = render_prompt(config)
                if text not in seen_texts:
                    break
                attempt += 1
            seen_texts.add(text)
            prompt_id = f"{atomicity:02d}-{index:03d}"
            prompts.append(build_prompt_spec(prompt_id, config))
    return prompts


# ---------------------------------------------------------------------------
# benchmark file format: one JSON record per line, ordered by (atomicity, id)

def prompt_to_record(prompt: PromptSpec) -> dict:
    record = {
        "id": prompt.id,
        "text": prompt.text,
        "atomicity": prompt.atomicity,
        "skills": [s for s in SKILL_ORDER if s in prompt.skills],
        "atoms": [_atom_to_record(a) for a in prompt.atoms],
    }
    if prompt.rewritten_text is not None:
        record["rewritten_text"] = prompt.rewritten_text
    return record


def _atom_to_record(atom: Atom) -> dict:
    record = {
        "id": atom.id,
        "kind": atom.kind,
        "surface": atom.surface,
        "subject_group": atom.subject_group,
    }
    if atom.object_group is not None:
        record["object_group"] = atom.object_group
    return record


def prompt_from_record(record: dict, vocab: Vocabulary) -> PromptSpec:
    config = parse_prompt(record["text"], vocab)
    prompt = build_prompt_spec(record["id"], config,
                               rewritten_text=record.get("rewritten_text"))
    if prompt.atomicity != record["atomicity"]:
        raise ValueError(
            f"prompt {record['id']}: stored atomicity {record['atomicity']} "
            f"does not match parsed atomicity {prompt.atomicity}")
    stored_atoms = tuple(
        Atom(a["id"], a["kind"], a["surface"], a["subject_group"], a.get("object_group"))
        for a in record["atoms"])
    if stored_atoms != prompt.atoms:
        raise ValueError(f"prompt {record['id']}: stored atoms do not match parsed text")
    return prompt


def save_benchmark(prompts: list[PromptSpec], path: str | Path) -> None:
    ordered = sorted(prompts, key=lambda p: (p.atomicity, p.id))
    with Path(path).open("w", encoding="utf-8") as fh:
        for prompt in ordered:
            fh.write(json.dumps(prompt_to_record(prompt)) + "\n")


def load_benchmark(path: str | Path, vocab: Vocabulary) -> list[PromptSpec]:
    prompts = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                prompts.append(prompt_from_record(json.loads(line), vocab))
    return prompts


def attach_rewrite(prompt: PromptSpec, rewritten_text: str) -> PromptSpec:
    return replace(prompt, rewritten_text=rewritten_text)
