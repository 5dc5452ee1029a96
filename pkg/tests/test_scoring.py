from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomeval.backend import FULL_PROMPT, Judgment
from atomeval.grammar import build_prompt_spec, parse_prompt
from atomeval.scoring import (
    ARITHMETIC,
    GEOMETRIC,
    METRICS,
    MetricValue,
    ScoreSet,
    aggregate_benchmark,
    atom_values,
    load_score_sets,
    prompt_values,
    rollup,
    save_score_sets,
    score_image,
    soft_tifa,
    tifa_score,
    vqascore,
)


def _judgment(p: float, atom_id=0, greedy: str | None = None) -> Judgment:
    if greedy is None:
        greedy = "Yes" if p >= 0.5 else "No"
    return Judgment("p", atom_id, p, greedy, "mock", f"k{atom_id}")


def _judgments(probs) -> list[Judgment]:
    return [_judgment(p, atom_id=i) for i, p in enumerate(probs)]


probabilities = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=10)


# ---------------------------------------------------------------------------
# vqascore / tifa / soft-tifa

def test_vqascore_identity():
    full = Judgment("p", FULL_PROMPT, 0.73, "Yes", "mock", "k")
    assert vqascore(full) == 0.73
    assert vqascore(Judgment("p", FULL_PROMPT, 0.0, "No", "mock", "k")) == 0.0
    assert vqascore(Judgment("p", FULL_PROMPT, 1.0, "Yes", "mock", "k")) == 1.0


def test_vqascore_rejects_atom_judgment():
    with pytest.raises(ValueError, match="FULL"):
        vqascore(_judgment(0.5, atom_id=3))


def test_tifa_fraction():
    judgments = [_judgment(0.9, 0), _judgment(0.8, 1), _judgment(0.6, 2),
                 _judgment(0.1, 3)]
    assert tifa_score(judgments) == 0.75


def test_tifa_all_match():
    assert tifa_score(_judgments([0.9, 0.8, 0.99])) == 1.0


def test_tifa_normalizes_answers():
    judgments = [_judgment(0.9, 0, greedy="Yes."), _judgment(0.9, 1, greedy=" yes")]
    assert tifa_score(judgments) == 1.0


def test_tifa_empty_contract():
    with pytest.raises(ValueError):
        tifa_score([])


def test_soft_tifa_examples():
    assert soft_tifa(_judgments([1.0, 0.25]), ARITHMETIC) == 0.625
    assert soft_tifa(_judgments([1.0, 0.25]), GEOMETRIC) == pytest.approx(0.5, abs=1e-12)
    assert soft_tifa(_judgments([0.37]), ARITHMETIC) == 0.37
    assert soft_tifa(_judgments([0.37]), GEOMETRIC) == 0.37
    assert soft_tifa(_judgments([0.9, 0.0, 0.8]), GEOMETRIC) == 0.0


def test_soft_tifa_empty_contract():
    with pytest.raises(ValueError):
        soft_tifa([], ARITHMETIC)


def test_soft_tifa_unknown_mean():
    with pytest.raises(ValueError, match="mean kind"):
        soft_tifa(_judgments([0.5]), "harmonic")


def test_soft_tifa_optional_floor():
    judgments = _judgments([0.9, 0.0])
    assert soft_tifa(judgments, GEOMETRIC) == 0.0
    floored = soft_tifa(judgments, GEOMETRIC, floor=0.01)
    assert floored == pytest.approx((0.9 * 0.01) ** 0.5, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(probabilities)
def test_am_gm_inequality(probs):
    judgments = _judgments(probs)
    am = soft_tifa(judgments, ARITHMETIC)
    gm = soft_tifa(judgments, GEOMETRIC)
    assert gm <= am + 1e-12
    if min(probs) == max(probs):
        assert gm == am  # exact equality when all inputs are identical
    elif max(probs) - min(probs) > 1e-9:
        assert gm < am  # strict once the spread is resolvable


@settings(max_examples=200, deadline=None)
@given(probabilities)
def test_permutation_invariance(probs):
    judgments = _judgments(probs)
    shuffled = judgments[::-1]
    for kind in (ARITHMETIC, GEOMETRIC):
        assert soft_tifa(judgments, kind) == pytest.approx(
            soft_tifa(shuffled, kind), abs=1e-15)
    assert tifa_score(judgments) == tifa_score(shuffled)


@settings(max_examples=200, deadline=None)
@given(probabilities, st.data())
def test_monotonic_in_each_probability(probs, data):
    index = data.draw(st.integers(min_value=0, max_value=len(probs) - 1))
    bump = data.draw(st.floats(min_value=0.0, max_value=1.0 - probs[index],
                               allow_nan=False))
    bumped = list(probs)
    bumped[index] = probs[index] + bump
    for kind in (ARITHMETIC, GEOMETRIC):
        assert soft_tifa(_judgments(bumped), kind) >= soft_tifa(_judgments(probs), kind) - 1e-12


def test_binary_probabilities_tifa_equals_am():
    rng = random.Random(17)
    for _ in range(200):
        probs = [rng.choice([0.0, 1.0]) for _ in range(rng.randint(1, 10))]
        judgments = _judgments(probs)  # coherent greedy: "Yes" iff p >= 0.5
        assert tifa_score(judgments) == soft_tifa(judgments, ARITHMETIC)


def test_tifa_equals_thresholded_probabilities():
    # mock coherence makes TIFA the fraction of probabilities >= 0.5
    rng = random.Random(18)
    for _ in range(100):
        probs = [rng.random() for _ in range(rng.randint(1, 10))]
        judgments = _judgments(probs)
        expected = sum(p >= 0.5 for p in probs) / len(probs)
        assert tifa_score(judgments) == expected


# ---------------------------------------------------------------------------
# aggregation

def test_aggregate_mean():
    sets = [
        ScoreSet("a", "m", False, 0.2, 0.2, 0.2, 0.2),
        ScoreSet("b", "m", False, 0.8, 0.8, 0.8, 0.8),
    ]
    for metric in METRICS:
        assert aggregate_benchmark(sets, metric) == 0.5


def test_aggregate_idempotent_on_identical():
    sets = [ScoreSet(f"p{i}", "m", False, 0.4, 0.4, 0.4, 0.4) for i in range(5)]
    assert aggregate_benchmark(sets, "tifa") == pytest.approx(0.4)


def test_aggregate_empty_contract():
    with pytest.raises(ValueError):
        aggregate_benchmark([], "tifa")


def test_aggregate_unknown_metric():
    sets = [ScoreSet("a", "m", False, 0.2, 0.2, 0.2, 0.2)]
    with pytest.raises(ValueError, match="unknown metric"):
        aggregate_benchmark(sets, "clip_score")


def test_benchmark_mean_equals_weighted_bucket_means():
    rng = random.Random(19)
    sets = []
    atomicity_by_id = {}
    for i in range(60):
        atomicity = rng.randint(3, 10)
        pid = f"p{i}"
        atomicity_by_id[pid] = atomicity
        v = rng.random()
        sets.append(ScoreSet(pid, "m", False, v, v, v, v))
    overall = aggregate_benchmark(sets, "vqascore")
    by_bucket: dict[int, list[float]] = {}
    for s in sets:
        by_bucket.setdefault(atomicity_by_id[s.prompt_id], []).append(s.vqascore)
    weighted = sum(len(vs) * (sum(vs) / len(vs)) for vs in by_bucket.values()) / len(sets)
    assert overall == pytest.approx(weighted, abs=1e-12)


def test_score_image_assembles_scoreset(vocab):
    prompt = build_prompt_spec("p", parse_prompt("three pink pigs", vocab))
    atoms = _judgments([1.0, 0.25, 0.64])
    full = Judgment("p", FULL_PROMPT, 0.7, "Yes", "mock", "kf")
    scores = score_image(prompt, full, atoms, "model-x", rewritten=True)
    assert scores.vqascore == 0.7
    assert scores.tifa == pytest.approx(2 / 3)
    assert scores.soft_tifa_am == pytest.approx((1.0 + 0.25 + 0.64) / 3)
    assert scores.soft_tifa_gm == pytest.approx((1.0 * 0.25 * 0.64) ** (1 / 3), rel=1e-12)
    assert scores.rewritten is True


def test_score_image_checks_atom_count(vocab):
    prompt = build_prompt_spec("p", parse_prompt("three pink pigs", vocab))
    full = Judgment("p", FULL_PROMPT, 0.7, "Yes", "mock", "kf")
    with pytest.raises(ValueError, match="atom judgments"):
        score_image(prompt, full, _judgments([0.5]), "m")


# ---------------------------------------------------------------------------
# rollups

def test_rollup_per_skill_hand_computed(vocab):
    # two prompts; per-skill means computed by hand from the atom table
    p1 = build_prompt_spec("p1", parse_prompt("three pink pigs", vocab))
    p2 = build_prompt_spec("p2", parse_prompt("a dog chasing a cat", vocab))
    j1 = _judgments([0.6, 0.8, 1.0])       # Count, Attribute, Object
    j2 = _judgments([0.5, 0.2, 0.9])       # Object, Relation(Verb), Object
    values = atom_values(p1, j1) + atom_values(p2, j2)
    table = rollup(values, "skill")
    means = {row.group: row.mean for row in table.rows}
    ns = {row.group: row.n for row in table.rows}
    assert means["Object"] == pytest.approx((1.0 + 0.5 + 0.9) / 3)
    assert means["Attribute"] == pytest.approx(0.8)
    assert means["Count"] == pytest.approx(0.6)
    assert means["Verb"] == pytest.approx(0.2)
    assert ns == {"Object": 3, "Attribute": 1, "Count": 1, "Verb": 1}
    assert [row.group for row in table.rows] == ["Object", "Attribute", "Count", "Verb"]


def test_rollup_single_group_equals_aggregate():
    sets = [ScoreSet(f"p{i}", "m", False, v, v, v, v)
            for i, v in enumerate([0.1, 0.5, 0.9])]
    values = prompt_values(sets, "tifa")
    table = rollup(values, "model")
    assert len(table.rows) == 1
    assert table.rows[0].mean == pytest.approx(aggregate_benchmark(sets, "tifa"))


def test_rollup_atomicity_rows_match_distinct_values():
    sets = [ScoreSet(f"p{i}", "m", False, 0.5, 0.5, 0.5, 0.5) for i in range(6)]
    atomicity_by_id = {"p0": 3, "p1": 3, "p2": 5, "p3": 5, "p4": 7, "p5": 7}
    values = prompt_values(sets, "vqascore", atomicity_by_id)
    table = rollup(values, "atomicity")
    assert [row.group for row in table.rows] == ["3", "5", "7"]
    assert all(row.n == 2 for row in table.rows)


def test_rollup_unknown_grouping():
    values = [MetricValue("m", 0.5, "p")]
    with pytest.raises(ValueError, match="grouping"):
        rollup(values, "color")


def test_rollup_missing_key():
    values = [MetricValue("m", 0.5, "p")]  # no skill attached
    with pytest.raises(ValueError, match="skill"):
        rollup(values, "skill")


def test_rollup_rejects_out_of_range():
    values = [MetricValue("m", 1.5, "p", skill="Object")]
    with pytest.raises(ValueError, match="outside"):
        rollup(values, "skill")


# ---------------------------------------------------------------------------
# files

def test_score_sets_roundtrip(tmp_path):
    sets = [
        ScoreSet("p1", "m", False, 0.123456789, 0.5, 0.25, 0.125),
        ScoreSet("p2", "m", True, 1.0, 1.0, 1.0, 1.0),
    ]
    path = tmp_path / "scores.jsonl"
    save_score_sets(sets, path)
    assert load_score_sets(path) == sets
