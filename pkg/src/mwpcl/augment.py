"""Self-supervised augmentation with synchronized text and equation edits.

Two transforms:

* question reordering: move the question sentence to the front and
  renumber the slots to match the new appearance order;
* reversed-operation augmentation: ask about a formerly known variable by
  symbolically inverting the equation, swapping the rewritten sentences.

Both keep the numeric link between text and equation intact, which is the
verifiable core: the rewritten equation must reproduce the new answer
under the renumbered slots.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import equation as eq
from .corpus import (
    DEFAULT_RULES,
    QUESTION_PUNCT,
    SENTENCE_PUNCT,
    Corpus,
    ProblemRecord,
    TextRules,
    make_record,
)
from .errors import (
    AmbiguousSentence,
    InsufficientAugments,
    NonInvertible,
    SingleSentence,
    TargetAbsent,
    TargetRepeated,
)

_ANS_PLACEHOLDER = "\x00ans"  # cannot collide with a real token


@dataclass(frozen=True)
class AugmentedRecord:
    base_id: str
    method: str  # "QR" | "RODA"
    record: ProblemRecord
    slot_permutation: dict[str, str]
    target_var: str | None = None


def _renumber(sentences) -> tuple[list[list[str]], dict[str, str]]:
    """Map slot tokens to fresh names by first appearance in the given
    sentence order; returns rewritten sentences and the old->new map."""
    mapping: dict[str, str] = {}
    out: list[list[str]] = []
    for sentence in sentences:
        row = []
        for token in sentence:
            if token == _ANS_PLACEHOLDER or eq.is_slot(token):
                if token not in mapping:
                    mapping[token] = eq.slot_name(len(mapping) + 1)
                row.append(mapping[token])
            else:
                row.append(token)
        out.append(row)
    return out, mapping


def question_reorder(record: ProblemRecord, rules: TextRules = DEFAULT_RULES) -> AugmentedRecord:
    """Move the question sentence to the front; slots renumber by the new
    appearance order and the equation follows the permutation."""
    if len(record.sentences) < 2:
        raise SingleSentence(record.id)
    q = record.question_index
    reordered = [list(record.sentences[q])]
    reordered.extend(list(s) for i, s in enumerate(record.sentences) if i != q)

    sentences, mapping = _renumber(reordered)
    new_slots = {mapping[name]: value for name, value in record.slots.items()}
    new_slots = dict(sorted(new_slots.items(), key=lambda kv: eq.slot_index(kv[0])))
    new_equation = eq.map_slots(record.equation, mapping)

    augmented = make_record(
        f"{record.id}#qr", sentences, 0, new_slots, new_equation,
        record.answer, origin="aug_qr")
    return AugmentedRecord(record.id, "QR", augmented, mapping)


# ---------------------------------------------------------------------------
# reversed-operation augmentation
# ---------------------------------------------------------------------------

def invert_equation(tree: eq.EquationTree, target: str) -> eq.EquationTree:
    """Solve the equation for ``target``: returns an expression over the
    remaining leaves plus the token ``ans`` standing for the original
    answer. The target must occur exactly once and the root-to-target
    path may not cross ``^``."""

    def occurrences(node: eq.EquationTree) -> int:
        if node.is_leaf:
            return 1 if node.label == target else 0
        return sum(occurrences(c) for c in node.children)

    count = occurrences(tree)
    if count == 0:
        raise TargetAbsent(target)
    if count > 1:
        raise TargetRepeated(target)

    def walk(node: eq.EquationTree, acc: eq.EquationTree) -> eq.EquationTree:
        if node.is_leaf:
            return acc
        op = node.label
        left, right = node.children
        if op == "^":
            raise NonInvertible(f"path to {target} crosses '^'")
        if occurrences(left):
            # acc = left <op> right, solve for left
            inverse = {"+": "-", "-": "+", "*": "/", "/": "*"}[op]
            return walk(left, eq.op_node(inverse, acc, right))
        # solve for right
        if op == "+":
            return walk(right, eq.op_node("-", acc, left))
        if op == "-":
            return walk(right, eq.op_node("-", left, acc))
        if op == "*":
            return walk(right, eq.op_node("/", acc, left))
        return walk(right, eq.op_node("/", left, acc))

    return walk(tree, eq.leaf(eq.ANS_TOKEN))


def _as_question(sentence, target, rules: TextRules):
    """Rewrite a declarative sentence to ask about ``target``: the numeral
    is replaced by the question phrase and the final punctuation becomes
    a question mark."""
    phrase = rules.question_phrase.split()
    out = []
    for token in sentence:
        if token == target:
            out.extend(phrase)
        else:
            out.append(token)
    if out and out[-1] in SENTENCE_PUNCT:
        out[-1] = "?"
    else:
        out.append("?")
    return out


def _as_declarative(sentence, answer_token, rules: TextRules):
    """Rewrite the question sentence to assert the answer: the first
    interrogative phrase is replaced by the answer token (appended before
    the final punctuation if no marker is found)."""
    tokens = list(sentence)
    lowered = [t.lower() for t in tokens]
    placed = False
    for marker in sorted((m.lower().split() for m in rules.question_markers),
                         key=len, reverse=True):
        k = len(marker)
        if k == 0 or marker[0] in QUESTION_PUNCT:
            continue
        for i in range(len(tokens) - k + 1):
            if tuple(lowered[i:i + k]) == tuple(marker):
                tokens[i:i + k] = [answer_token]
                placed = True
                break
        if placed:
            break
    if tokens and tokens[-1] in SENTENCE_PUNCT:
        if not placed:
            tokens.insert(len(tokens) - 1, answer_token)
        tokens[-1] = "."
    else:
        if not placed:
            tokens.append(answer_token)
        tokens.append(".")
    return tokens


def roda_augment(record: ProblemRecord, target: str,
                 rules: TextRules = DEFAULT_RULES) -> AugmentedRecord:
    """Ask about the known variable ``target``: its sentence becomes the
    question (moved last), the old question becomes a declarative sentence
    asserting the original answer (placed where the target sentence was),
    and the equation is inverted to solve for the target."""
    if target not in record.slots:
        raise TargetAbsent(target)

    hits = [(i, sentence.count(target)) for i, sentence in enumerate(record.sentences)
            if target in sentence]
    total = sum(count for _, count in hits)
    if total == 0:
        raise TargetAbsent(f"{target} not in any sentence")
    if total > 1:
        raise AmbiguousSentence(f"{target} occurs {total} times in the text")
    sentence_index = hits[0][0]
    if sentence_index == record.question_index:
        raise AmbiguousSentence(f"{target} occurs only in the question sentence")

    inverted = invert_equation(record.equation, target)

    question = _as_question(record.sentences[sentence_index], target, rules)
    declarative = _as_declarative(record.sentences[record.question_index],
                                  _ANS_PLACEHOLDER, rules)

    reordered = []
    for i, sentence in enumerate(record.sentences):
        if i == record.question_index:
            continue
        reordered.append(declarative if i == sentence_index else list(sentence))
    reordered.append(question)

    sentences, mapping = _renumber(reordered)
    ans_slot = mapping[_ANS_PLACEHOLDER]

    new_slots = {mapping[name]: value for name, value in record.slots.items()
                 if name != target}
    new_slots[ans_slot] = record.answer
    new_slots = dict(sorted(new_slots.items(), key=lambda kv: eq.slot_index(kv[0])))

    slot_map = {name: new for name, new in mapping.items() if name != _ANS_PLACEHOLDER}
    new_equation = eq.map_slots(inverted, {**slot_map, eq.ANS_TOKEN: ans_slot})

    augmented = make_record(
        f"{record.id}#roda-{target}", sentences, len(sentences) - 1,
        new_slots, new_equation, record.slots[target], origin="aug_roda")
    permutation = dict(slot_map)
    permutation[eq.ANS_TOKEN] = ans_slot
    return AugmentedRecord(record.id, "RODA", augmented, permutation, target_var=target)


def eligible_roda_targets(record: ProblemRecord) -> list[str]:
    """Slots for which :func:`roda_augment` succeeds, in slot order."""
    targets = []
    for name in record.slots:
        try:
            roda_augment(record, name)
        except Exception:
            continue
        targets.append(name)
    return targets


def roda_coverage(corpus: Corpus) -> float:
    """Fraction of records with at least one eligible inversion target
    (reported, not asserted; rule-based eligibility)."""
    if not corpus.records:
        return 0.0
    covered = sum(1 for r in corpus.records if eligible_roda_targets(r))
    return covered / len(corpus.records)


def augment_corpus(corpus: Corpus, methods=("QR", "RODA"), targets="all",
                   seed: int | None = None,
                   rules: TextRules = DEFAULT_RULES) -> list[AugmentedRecord]:
    """All successful augments of a corpus, in deterministic record order.

    ``targets`` selects the reversed-operation mode: ``all`` emits one
    augment per eligible slot, ``random`` picks a single eligible slot per
    record with the seeded RNG.
    """
    rng = random.Random(seed)
    out: list[AugmentedRecord] = []
    for record in corpus.records:
        if "QR" in methods:
            try:
                out.append(question_reorder(record, rules))
            except Exception:
                pass
        if "RODA" in methods:
            names = eligible_roda_targets(record)
            if targets == "random" and names:
                names = [rng.choice(names)]
            for name in names:
                out.append(roda_augment(record, name, rules))
    return out


def generate_challenge_set(corpus: Corpus, seed: int, size: int,
                           methods=("QR", "RODA"),
                           rules: TextRules = DEFAULT_RULES) -> list[AugmentedRecord]:
    """Reproducible random sample of successful augments."""
    pool = augment_corpus(corpus, methods=methods, targets="all", rules=rules)
    if size > len(pool):
        raise InsufficientAugments(f"requested {size}, only {len(pool)} augments available")
    rng = random.Random(seed)
    return rng.sample(pool, size)
