import math
import random

import pytest

from mwpcl.augment import (
    augment_corpus,
    eligible_roda_targets,
    generate_challenge_set,
    invert_equation,
    question_reorder,
    roda_augment,
    roda_coverage,
)
from mwpcl.corpus import Corpus, make_record
from mwpcl.equation import evaluate, parse_equation, slot_names, template_key
from mwpcl.errors import (
    InsufficientAugments,
    NonInvertible,
    SingleSentence,
    TargetAbsent,
    TargetRepeated,
)

from synth import random_corpus, random_record


def _record(sentences, question_index, slots, equation, answer, rid="r"):
    return make_record(rid, sentences, question_index, slots,
                       parse_equation(equation), answer, "train")


# ---------------------------------------------------------------------------
# question reordering
# ---------------------------------------------------------------------------

def test_qr_identity_permutation_when_question_has_no_numeral():
    record = _record(
        [["a", "has", "n1", "."], ["b", "has", "n2", "."], ["how", "many", "?"]],
        2, {"n1": 3.0, "n2": 4.0}, "n1+n2", 7.0)
    augmented = question_reorder(record)
    assert augmented.slot_permutation == {"n1": "n1", "n2": "n2"}
    assert template_key(augmented.record.equation) == template_key(record.equation)
    assert augmented.record.question_index == 0
    assert augmented.record.origin == "aug_qr"
    assert augmented.record.answer == record.answer


def test_qr_renumbers_when_question_leads_with_numeral():
    # spec worked example: sentences S1(n1), S2(n2), Q(n3); equation n1+n3
    record = _record(
        [["a", "has", "n1", "."], ["b", "has", "n2", "."], ["total", "with", "n3", "?"]],
        2, {"n1": 3.0, "n2": 4.0, "n3": 5.0}, "n1+n3", 8.0)
    augmented = question_reorder(record)
    assert augmented.slot_permutation == {"n3": "n1", "n1": "n2", "n2": "n3"}
    assert template_key(augmented.record.equation) == "+ n2 n1"
    permuted = {augmented.slot_permutation[k]: v for k, v in record.slots.items()}
    assert evaluate(augmented.record.equation, permuted) == record.answer


def test_qr_single_sentence_rejected():
    record = _record([["just", "n1", "?"]], 0, {"n1": 2.0}, "n1", 2.0)
    with pytest.raises(SingleSentence):
        question_reorder(record)


def test_qr_round_trip_on_random_records():
    rng = random.Random(21)
    checked = 0
    for i in range(100):
        record = random_record(rng, f"q{i}")
        try:
            augmented = question_reorder(record)
        except SingleSentence:
            continue
        permuted = {augmented.slot_permutation[k]: v for k, v in record.slots.items()}
        assert evaluate(augmented.record.equation, permuted) == record.answer
        checked += 1
    assert checked > 80


# ---------------------------------------------------------------------------
# equation inversion
# ---------------------------------------------------------------------------

def test_invert_addition():
    inverted = invert_equation(parse_equation("n1+n2"), "n1")
    assert template_key(inverted) == "- ans n2"


def test_invert_division_right_operand():
    inverted = invert_equation(parse_equation("n1/n2"), "n2")
    assert template_key(inverted) == "/ n1 ans"
    # n1=6, n2=2 -> ans=3 and 6/3 = 2
    assert evaluate(inverted, {"n1": 6.0, "ans": 3.0}) == 2.0


def test_invert_target_repeated():
    with pytest.raises(TargetRepeated):
        invert_equation(parse_equation("n1+n1*n2"), "n1")


def test_invert_target_absent():
    with pytest.raises(TargetAbsent):
        invert_equation(parse_equation("n1+n2"), "n3")


def test_invert_power_not_invertible():
    with pytest.raises(NonInvertible):
        invert_equation(parse_equation("n1^n2"), "n1")


def test_invert_algebraic_round_trip():
    """Substituting the inverted expression back satisfies the original
    equation numerically, 1000 random positive assignments."""
    rng = random.Random(5)
    expressions = ["n1+n2", "n1-n2", "n1*n2", "n1/n2", "(n1+n2)*n3",
                   "n1/(n2+n3)", "n1-n2/n3", "(n1-n2)*(n3+n4)"]
    cases = 0
    while cases < 1000:
        tree = parse_equation(rng.choice(expressions))
        names = slot_names(tree)
        target = rng.choice(names)
        assignment = {n: rng.uniform(0.5, 10.0) for n in names}
        answer = evaluate(tree, assignment)
        if not 1e-2 <= abs(answer) <= 1e4:
            continue
        inverted = invert_equation(tree, target)
        values = {n: v for n, v in assignment.items() if n != target}
        values["ans"] = answer
        got = evaluate(inverted, values)
        assert math.isclose(got, assignment[target], rel_tol=1e-9)
        cases += 1


# ---------------------------------------------------------------------------
# RODA
# ---------------------------------------------------------------------------

def _tom_record():
    return _record(
        [["tom", "has", "n1", "."], ["he", "buys", "n2", "."], ["how", "many", "now", "?"]],
        2, {"n1": 3.0, "n2": 5.0}, "n1+n2", 8.0)


def test_roda_worked_example():
    augmented = roda_augment(_tom_record(), "n2")
    record = augmented.record
    # the target's sentence becomes the final question
    assert record.question_index == len(record.sentences) - 1
    assert record.sentences[-1][-1] == "?"
    assert "how" in record.sentences[-1]
    # the old question now asserts the original answer
    assert any(8.0 == record.slots.get(tok) for s in record.sentences[:-1] for tok in s)
    assert record.answer == 5.0
    assert evaluate(record.equation, record.slots) == 5.0
    assert record.origin == "aug_roda"
    assert augmented.target_var == "n2"


def test_roda_target_only_in_question_rejected():
    record = _record(
        [["tom", "has", "n1", "."], ["rate", "of", "n2", "?"]],
        1, {"n1": 3.0, "n2": 5.0}, "n1*n2", 15.0)
    with pytest.raises(Exception):
        roda_augment(record, "n2")


def test_roda_absent_target_rejected():
    with pytest.raises(TargetAbsent):
        roda_augment(_tom_record(), "n9")


def test_roda_round_trip_on_random_records():
    rng = random.Random(17)
    checked = 0
    for i in range(100):
        record = random_record(rng, f"rd{i}")
        for target in eligible_roda_targets(record):
            augmented = roda_augment(record, target)
            got = evaluate(augmented.record.equation, augmented.record.slots)
            assert math.isclose(got, record.slots[target], rel_tol=1e-9)
            assert augmented.record.answer == record.slots[target]
            checked += 1
    assert checked > 50


def test_roda_coverage_reported():
    corpus = random_corpus(31, 40)
    coverage = roda_coverage(corpus)
    assert 0.0 <= coverage <= 1.0


# ---------------------------------------------------------------------------
# challenge set
# ---------------------------------------------------------------------------

def test_challenge_set_empty():
    corpus = random_corpus(1, 10)
    assert generate_challenge_set(corpus, seed=3, size=0) == []


def test_challenge_set_deterministic():
    corpus = random_corpus(2, 20)
    first = generate_challenge_set(corpus, seed=9, size=10)
    second = generate_challenge_set(corpus, seed=9, size=10)
    assert [a.record.id for a in first] == [a.record.id for a in second]
    third = generate_challenge_set(corpus, seed=10, size=10)
    assert [a.record.id for a in first] != [a.record.id for a in third]


def test_challenge_set_insufficient():
    corpus = random_corpus(3, 5)
    with pytest.raises(InsufficientAugments):
        generate_challenge_set(corpus, seed=1, size=400)


def test_challenge_set_method_tagged():
    corpus = random_corpus(4, 20)
    sample = generate_challenge_set(corpus, seed=2, size=8)
    for item in sample:
        assert item.method in ("QR", "RODA")
        assert item.record.origin in ("aug_qr", "aug_roda")
        assert item.base_id in corpus.by_id


def test_augment_corpus_random_target_mode_deterministic():
    corpus = random_corpus(6, 15)
    first = augment_corpus(corpus, methods=("RODA",), targets="random", seed=4)
    second = augment_corpus(corpus, methods=("RODA",), targets="random", seed=4)
    assert [a.record.id for a in first] == [a.record.id for a in second]
