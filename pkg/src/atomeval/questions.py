"""Yes/no probe questions derived from the same templates as the prompts.

Per-atom questions feed the checklist-style metrics; the single
whole-prompt question feeds the soft whole-image probability. All probes
are affirmative, so the expected answer is always "Yes". Wording is fixed:
changing it moves the probabilities a VQA backend returns.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import (
    KIND_ATTRIBUTE,
    KIND_COUNT,
    KIND_OBJECT,
    KIND_RELATION,
    Group,
    PromptSpec,
    object_surface,
)
from .vocabulary import indefinite_article

FULL_PROMPT = "FULL"
EXPECTED_ANSWER = "Yes"
_SUFFIX = " Answer Yes or No."


@dataclass(frozen=True)
class AtomQuestion:
    prompt_id: str
    atom_id: int
    question_text: str
    expected_answer: str = EXPECTED_ANSWER


@dataclass(frozen=True)
class VqaPrompt:
    prompt_id: str
    question_text: str
    expected_answer: str = EXPECTED_ANSWER
    atom_id: str = FULL_PROMPT


def _subject_phrase(group: Group) -> str:
    """"the pig" / "the pigs", with Is/Are agreement left to the caller."""
    return f"the {object_surface(group)}"


def atom_questions(prompt: PromptSpec) -> list[AtomQuestion]:
    """One question per atom, in atom order."""
    config = prompt.config
    questions: list[AtomQuestion] = []
    for atom in prompt.atoms:
        group = config.groups[atom.subject_group]
        if atom.kind == KIND_OBJECT:
            article = indefinite_article(group.object.lemma)
            text = f"Is there {article} {group.object.lemma} in the image?{_SUFFIX}"
        elif atom.kind == KIND_ATTRIBUTE:
            assert group.attribute is not None
            if group.count is not None:
                text = f"Are {_subject_phrase(group)} {group.attribute.word}?{_SUFFIX}"
            else:
                text = f"Is {_subject_phrase(group)} {group.attribute.word}?{_SUFFIX}"
        elif atom.kind == KIND_COUNT:
            assert group.count is not None
            text = (f"Are there exactly {group.count.word} "
                    f"{group.object.plural} in the image?{_SUFFIX}")
        elif atom.kind == KIND_RELATION:
            assert atom.object_group is not None
            relation = config.connectors[atom.subject_group].relation
            assert relation is not None
            target = config.groups[atom.object_group]
            verb = "Are" if group.count is not None else "Is"
            text = (f"{verb} {_subject_phrase(group)} {relation.phrase} "
                    f"{_subject_phrase(target)}?{_SUFFIX}")
        else:
            raise ValueError(f"unknown atom kind {atom.kind!r}")
        questions.append(AtomQuestion(prompt.id, atom.id, text))
    return questions


def vqascore_prompt(prompt: PromptSpec) -> VqaPrompt:
    """Whole-prompt probe; always built from the original text, never the
    rewritten one."""
    if not prompt.text.strip():
        raise ValueError(f"prompt {prompt.id} has empty text")
    return VqaPrompt(
        prompt_id=prompt.id,
        question_text=f"Does this image show {prompt.text}? Answer in one word, Yes or No.",
    )


def questions_to_records(questions: list) -> list[dict]:
    return [
        {
            "prompt_id": q.prompt_id,
            "atom_id": q.atom_id,
            "question": q.question_text,
            "expected": q.expected_answer,
        }
        for q in questions
    ]
