"""Corpus ingestion: numeral-to-slot normalization, sentence segmentation,
and the canonical line-delimited record format.

A record's text is a list of token sequences (one per sentence) with the
numbers replaced by slot tokens ``n1..nk``, numbered by first appearance
and deduplicated by value. The equation is stored in prefix notation over
the same slot tokens.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from . import equation as eq
from .errors import InvariantViolation, NoQuestion, ParseError, UnmatchedNumeral

ORIGINS = ("train", "dev", "test", "aug_qr", "aug_roda")

SENTENCE_PUNCT = (".", "?", "!", ";", "。", "？", "！", "；")
QUESTION_PUNCT = ("?", "？")

ANSWER_REL_TOL = 1e-6

# numerals recognized in raw text: percentages, simple solidus fractions,
# decimals and integers (mixed-word numbers are out)
_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)%$")
_FRACTION_RE = re.compile(r"(\d+)/(\d+)$")
_DECIMAL_RE = re.compile(r"\d+(?:\.\d+)?$")

_PUNCT_CLASS = r".?!;。？！；,，:：、()（）"
_TEXT_TOKEN_RE = re.compile(
    r"\d+(?:\.\d+)?%"
    r"|\d+/\d+"
    r"|\d+(?:\.\d+)?"
    r"|[一-鿿]"
    rf"|[{re.escape(_PUNCT_CLASS)}]"
    rf"|[^\s一-鿿{re.escape(_PUNCT_CLASS)}]+"
)

# guards keep digits inside identifiers (n1, n_2) from matching
_EQ_NUMERAL_RE = re.compile(
    r"(?<![A-Za-z_0-9.])(?:\d+(?:\.\d+)?%|\d+/\d+|\d+(?:\.\d+)?)(?![A-Za-z_0-9.%])"
)


@dataclass(frozen=True)
class TextRules:
    """Language-dependent knobs: interrogative markers and recomposition
    phrases, each given as space-joined token sequences."""

    question_markers: tuple[str, ...] = (
        "how many", "how much", "how long", "how far", "how",
        "what", "which", "多 少", "几", "?", "？",
    )
    question_phrase: str = "how many"
    require_question: bool = False


DEFAULT_RULES = TextRules()


@dataclass(frozen=True)
class ProblemRecord:
    """One math word problem in canonical slot-normalized form."""

    id: str
    sentences: tuple[tuple[str, ...], ...]
    question_index: int
    slots: dict[str, float]
    equation: eq.EquationTree
    answer: float
    origin: str = "train"

    def tokens(self) -> tuple[str, ...]:
        """All tokens in sentence order (the concatenated text)."""
        return tuple(tok for sentence in self.sentences for tok in sentence)

    def template_key(self) -> str:
        return eq.template_key(self.equation)


def numeral_value(token: str):
    """Numeric value of a text numeral token, or None if not a numeral."""
    m = _PERCENT_RE.match(token)
    if m:
        return float(m.group(1)) / 100.0
    m = _FRACTION_RE.match(token)
    if m:
        denom = float(m.group(2))
        if denom == 0:
            return None
        return float(m.group(1)) / denom
    if _DECIMAL_RE.match(token):
        return float(token)
    return None


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization plus CJK character splitting; numerals
    (incl. percentages and solidus fractions) stay single tokens."""
    return _TEXT_TOKEN_RE.findall(text)


def normalize_numbers(raw_text: str, raw_equation: str,
                      constants=(1.0, eq.PI)) -> tuple[list[str], dict[str, float], str]:
    """Replace numerals by slot tokens ``n1..nk`` in text and equation.

    Slots are numbered by first appearance in the text and deduplicated by
    value, so a repeated numeral maps every occurrence (text and equation)
    to one slot. Equation numerals that match no slot must be whitelisted
    constants, otherwise :class:`UnmatchedNumeral` is raised.

    Returns ``(tokens, slots, equation_string)``.
    """
    if not raw_text.strip():
        raise UnmatchedNumeral("empty problem text")

    tokens = []
    slots: dict[str, float] = {}
    value_to_slot: dict[float, str] = {}
    for token in tokenize(raw_text):
        value = numeral_value(token)
        if value is None:
            tokens.append(token)
            continue
        slot = value_to_slot.get(value)
        if slot is None:
            slot = eq.slot_name(len(slots) + 1)
            value_to_slot[value] = slot
            slots[slot] = value
        tokens.append(slot)

    constants = tuple(float(c) for c in constants)

    def substitute(match: re.Match) -> str:
        literal = match.group(0)
        value = numeral_value(literal)
        if value in value_to_slot:
            return value_to_slot[value]
        if "/" in literal:
            # no slot holds the fraction's value: treat the solidus as division
            num, denom = literal.split("/")
            return f"{substitute_plain(num)}/{substitute_plain(denom)}"
        if value in constants:
            return literal
        raise UnmatchedNumeral(f"equation numeral {literal!r} not in text")

    def substitute_plain(literal: str) -> str:
        value = float(literal)
        if value in value_to_slot:
            return value_to_slot[value]
        if value in constants:
            return literal
        raise UnmatchedNumeral(f"equation numeral {literal!r} not in text")

    equation = _EQ_NUMERAL_RE.sub(substitute, raw_equation)
    return tokens, slots, equation


def segment_sentences(tokens, rules: TextRules = DEFAULT_RULES) -> tuple[list[list[str]], int]:
    """Split a token stream at sentence-final punctuation and locate the
    question: the last sentence containing a configured interrogative
    marker, else the last sentence."""
    sentences: list[list[str]] = []
    current: list[str] = []
    has_content = False
    for token in tokens:
        current.append(token)
        if token in SENTENCE_PUNCT:
            if has_content:
                sentences.append(current)
                current = []
                has_content = False
            else:
                current = []  # stray punctuation
        elif token not in _PUNCT_CLASS:
            has_content = True
    if has_content:
        sentences.append(current)

    if not sentences:
        raise NoQuestion("no sentences found")

    marker_seqs = [tuple(m.lower().split()) for m in rules.question_markers]
    question_index = None
    for index, sentence in enumerate(sentences):
        lowered = [t.lower() for t in sentence]
        if any(_contains(lowered, marker) for marker in marker_seqs):
            question_index = index
    if question_index is None:
        if rules.require_question:
            raise NoQuestion("no interrogative marker found")
        question_index = len(sentences) - 1
    return sentences, question_index


def _contains(tokens, phrase) -> bool:
    k = len(phrase)
    if k == 0 or k > len(tokens):
        return False
    return any(tuple(tokens[i:i + k]) == phrase for i in range(len(tokens) - k + 1))


# ---------------------------------------------------------------------------
# record construction and validation
# ---------------------------------------------------------------------------

def make_record(record_id, sentences, question_index, slots, equation, answer,
                origin="train") -> ProblemRecord:
    record = ProblemRecord(
        id=str(record_id),
        sentences=tuple(tuple(s) for s in sentences),
        question_index=int(question_index),
        slots=dict(slots),
        equation=equation if isinstance(equation, eq.EquationTree) else eq.parse_prefix(equation),
        answer=float(answer),
        origin=origin,
    )
    validate_record(record)
    return record


def validate_record(record: ProblemRecord):
    if record.origin not in ORIGINS:
        raise InvariantViolation(record.id, f"unknown origin {record.origin!r}")
    if not record.sentences:
        raise InvariantViolation(record.id, "no sentences")
    if not 0 <= record.question_index < len(record.sentences):
        raise InvariantViolation(record.id, "question_index out of range")

    expected = [eq.slot_name(i + 1) for i in range(len(record.slots))]
    if list(record.slots) != expected:
        raise InvariantViolation(record.id, f"slot names {list(record.slots)} not contiguous")
    first_seen: list[str] = []
    for token in record.tokens():
        if eq.is_slot(token):
            if token not in record.slots:
                raise InvariantViolation(record.id, f"text slot {token!r} missing from slots")
            if token not in first_seen:
                first_seen.append(token)
    if first_seen != expected[:len(first_seen)]:
        raise InvariantViolation(record.id, "slots not numbered by first appearance")

    for name in eq.slot_names(record.equation):
        if name not in record.slots:
            raise InvariantViolation(record.id, f"equation slot {name!r} missing from slots")

    try:
        value = eq.evaluate(record.equation, record.slots)
    except Exception as exc:
        raise InvariantViolation(record.id, f"equation does not evaluate: {exc}") from exc
    scale = max(abs(record.answer), 1e-12)
    if abs(value - record.answer) > ANSWER_REL_TOL * max(scale, abs(value)):
        raise InvariantViolation(
            record.id, f"equation evaluates to {value!r}, answer is {record.answer!r}")


def ingest_record(record_id, raw_text, raw_equation, answer, origin="train",
                  rules: TextRules = DEFAULT_RULES) -> tuple[ProblemRecord, bool]:
    """Normalize and segment one raw problem.

    Returns the record plus a flag marking that a fraction or percentage
    numeral was slotted as its evaluated decimal (surface form lost).
    """
    tokens, slots, equation = normalize_numbers(raw_text, raw_equation)
    lossy = any(("/" in t or "%" in t) and numeral_value(t) is not None
                for t in tokenize(raw_text))
    sentences, question_index = segment_sentences(tokens, rules)
    record = make_record(record_id, sentences, question_index, slots,
                         eq.parse_equation(equation), answer, origin)
    return record, lossy


# ---------------------------------------------------------------------------
# corpus container
# ---------------------------------------------------------------------------

@dataclass
class Corpus:
    records: list[ProblemRecord] = field(default_factory=list)
    by_id: dict[str, ProblemRecord] = field(default_factory=dict)
    template_index: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records) -> "Corpus":
        corpus = cls()
        for record in records:
            corpus.add(record)
        return corpus

    def add(self, record: ProblemRecord):
        if record.id in self.by_id:
            raise InvariantViolation(record.id, "duplicate record id")
        self.records.append(record)
        self.by_id[record.id] = record
        self.template_index.setdefault(record.template_key(), []).append(record.id)

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------

def record_to_json(record: ProblemRecord, extra: dict | None = None) -> str:
    payload = {
        "id": record.id,
        "sentences": [list(s) for s in record.sentences],
        "question_index": record.question_index,
        "slots": [[name, value] for name, value in record.slots.items()],
        "equation": eq.to_prefix(record.equation),
        "answer": record.answer,
        "origin": record.origin,
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def record_from_json(line: str, line_no: int = 0) -> ProblemRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(line_no, f"bad JSON: {exc}") from exc
    try:
        return make_record(
            payload["id"],
            payload["sentences"],
            payload["question_index"],
            {name: float(value) for name, value in payload["slots"]},
            payload["equation"],
            payload["answer"],
            payload.get("origin", "train"),
        )
    except KeyError as exc:
        raise ParseError(line_no, f"missing field {exc}") from exc


def load_corpus(path) -> Corpus:
    """Load a canonical line-delimited corpus, validating every record."""
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            corpus.add(record_from_json(line, line_no))
    return corpus


def serialize_corpus(corpus: Corpus) -> str:
    return "".join(record_to_json(r) + "\n" for r in corpus.records)


def save_corpus(corpus: Corpus, path, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(serialize_corpus(corpus))


def load_raw(path):
    """Yield raw-ingest payloads: id, text, infix equation, answer."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"bad JSON: {exc}") from exc
            missing = {"id", "text", "equation", "answer"} - payload.keys()
            if missing:
                raise ParseError(line_no, f"missing fields {sorted(missing)}")
            yield line_no, payload


def ingest_corpus(path, origin="train", rules: TextRules = DEFAULT_RULES):
    """Ingest a raw-format file; returns (corpus, ids flagged for lossy
    fraction slotting)."""
    corpus = Corpus()
    lossy_ids: list[str] = []
    for line_no, payload in load_raw(path):
        try:
            record, lossy = ingest_record(
                payload["id"], payload["text"], payload["equation"],
                payload["answer"], payload.get("origin", origin), rules)
        except (InvariantViolation, ParseError):
            raise
        except Exception as exc:
            raise ParseError(line_no, str(exc)) from exc
        corpus.add(record)
        if lossy:
            lossy_ids.append(record.id)
    return corpus, lossy_ids
